//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//!
//! Reference values come from independent computations here (hand-coded
//! matrices, nalgebra inverses and eigenvalues), not from the library.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use descr_switch::lyapunov::{
    finsler_certificate, interlacing_kernel_check, search_common_p, verify_common_p, verify_lyapunov_matrix,
    SearchOptions,
};
use descr_switch::matkit::{identity, symmetric_eigenvalues};
use descr_switch::random::{gaussian, kernel_lemma_instance, lyapunov_for, orthogonal, qw_pair, random_symmetric};
use descr_switch::sim::{find_epsilon, mechanical_p, simulate, MechanicalParams, Surface, SwitchingSignal};
use descr_switch::switched::{check_theorem1, reduce_order};
use descr_switch::{DescriptorPair, Error, Matrix, Restriction, SwitchedSystem, Tolerances, Vector};
use descr_switch_cli::{ReportFile, SystemFile};
use nalgebra::{dmatrix, dvector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

/// Name, time limit in seconds, body.
type Criterion = (&'static str, f64, fn() -> Check);

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn system_path(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "systems", name]
        .iter()
        .collect();
    p.display().to_string()
}

fn load(name: &str) -> descr_switch_cli::files::LoadedSystem {
    SystemFile::read(std::path::Path::new(&system_path(name)))
        .and_then(|f| f.build(None))
        .expect("reference system file")
}

fn cli(args: &[&str]) -> (i32, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = descr_switch_cli::run(
        std::iter::once("descr-switch").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, String::from_utf8(out).unwrap())
}

fn constants() -> (f64, f64, f64) {
    (PI - 1.0, 1.0 / (4.0 * PI + 1.0), 4.0 * PI * PI + 1.0)
}

/// `A^-1 E` of both planar modes, from the printed matrices.
fn planar_oracle() -> [Matrix; 2] {
    let a1 = dmatrix![-1.0, 4.0 * PI; -4.0 * PI, -4.0];
    let a2 = dmatrix![-1.0, 4.0 * PI; -PI, -1.0];
    let e1 = dmatrix![1.0, 0.0; 0.0, 1.0];
    let e2 = dmatrix![1.0, 0.0; 1.0, 0.0];
    [a1.try_inverse().unwrap() * e1, a2.try_inverse().unwrap() * e2]
}

fn quadratic(p: &Matrix, x: &Vector) -> f64 {
    (x.transpose() * p * x)[0]
}

fn planar_spectral() -> Check {
    let (code, out) = cli(&["check", &system_path("example2.json"), "--method", "spectral01"]);
    ensure(code == 0, || format!("exit code {code}"))?;
    let report = ReportFile::parse(&out).map_err(|e| e.to_string())?;
    ensure(report.certified(), || format!("verdict {:?}", report.verdict))?;
    let mut reported: Vec<f64> = report
        .product_eigenvalues
        .iter()
        .map(|[re, im]| re.hypot(*im))
        .collect();
    reported.sort_by(f64::total_cmp);
    let [f1, f2] = planar_oracle();
    let mut oracle: Vec<f64> = (f1 * f2).complex_eigenvalues().iter().map(|z| z.norm()).collect();
    oracle.sort_by(f64::total_cmp);
    ensure(reported.len() == 2, || format!("{} eigenvalues", reported.len()))?;
    ensure(reported[0] < 1e-8, || format!("zero eigenvalue {:e}", reported[0]))?;
    ensure((reported[1] - 0.0042).abs() < 5e-4, || {
        format!("second eigenvalue {}", reported[1])
    })?;
    ensure((reported[1] - oracle[1]).abs() < 1e-12, || {
        format!("oracle {} vs {}", oracle[1], reported[1])
    })?;
    Ok(format!("eigenvalues {{{:.1e}, {:.5}}}", reported[0], reported[1]))
}

fn planar_structure() -> Check {
    let (code, out) = cli(&["analyze", &system_path("example2.json")]);
    ensure(code == 0, || format!("exit code {code}"))?;
    let report = ReportFile::parse(&out).map_err(|e| e.to_string())?;
    let indices: Vec<_> = report.modes.iter().map(|m| m.index).collect();
    ensure(indices == [Some(0), Some(1)], || format!("indices {indices:?}"))?;
    let (k1, k2, _) = constants();
    let line = dvector![k1 * k2, 1.0];
    let sys = load("example2.json").system;
    let c = sys.mode(1).consistency();
    ensure(c.dim() == 1, || format!("consistency dimension {}", c.dim()))?;
    let off = (c.basis().transpose() * &line).amax() / line.norm();
    ensure(off < 1e-10, || format!("basis leaves the line by {off:e}"))?;
    let x2 = format!("{:.4}", -k1 * k2);
    ensure(x2 == "-0.1579", || format!("x2 = {x2}"))?;
    Ok(format!("indices (0, 1), C2: {:.4} x1 + x2 = 0", k1 * k2))
}

fn three_state_reduction() -> Check {
    let (k1, k2, k3) = constants();
    let a = [
        dmatrix![-1.0, 0.0, 4.0 * PI; 0.0, -1.0, 0.0; -4.0 * PI, 0.0, -4.0],
        dmatrix![-k2 * k3, 0.0, 0.0; 0.0, -1.0, 0.0; -4.0 * k1 * k2 * k3, -1.0, -4.0 * k3],
    ];
    let y = dmatrix![1.0, 0.0; 0.0, 0.0; 0.0, 1.0];
    let x = [y.clone(), dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 1.0]];
    let planar = planar_oracle();
    let mut gap = 0.0f64;
    for k in 0..2 {
        let e_tilde = y.transpose() * a[k].clone().try_inverse().unwrap() * &x[k];
        gap = gap.max((&e_tilde - &planar[k]).amax());
    }
    ensure(gap <= 1e-10, || format!("printed factors give a gap of {gap:e}"))?;

    let loaded = load("example3.json");
    let (_, data) = reduce_order(&loaded.system, loaded.decompositions.as_deref()).map_err(|e| e.to_string())?;
    let lib_gap = (0..2)
        .map(|k| (&data.e_tilde[k] - &planar[k]).amax())
        .fold(0.0, f64::max);
    ensure(lib_gap <= 1e-10, || format!("library reduction off by {lib_gap:e}"))?;

    let (code, out) = cli(&["check", &system_path("example3.json"), "--method", "spectral12"]);
    ensure(code == 0, || format!("spectral12 exit code {code}: {out}"))?;
    Ok(format!("max entry gap {:.1e}, spectral12 certified", gap.max(lib_gap)))
}

fn mechanical_certificate() -> Check {
    let params = MechanicalParams {
        m1: 1.0,
        m2: 1.0,
        c1: 0.5,
        c2: 0.5,
        k1: 1.0,
        k2: 1.0,
        ..Default::default()
    };
    let eps = find_epsilon(&params).map_err(|e| e.to_string())?;
    ensure(eps > 0.0, || format!("epsilon {eps}"))?;
    let (sys, _) = descr_switch::sim::build_mechanical(&params).map_err(|e| e.to_string())?;
    let p = mechanical_p(&params, eps);
    let v = check_theorem1(&sys, &[p.clone(), p.clone()]).map_err(|e| e.to_string())?;
    ensure(v.certified(), || {
        format!("{:?}", v.failed_diagnostics().collect::<Vec<_>>())
    })?;

    // velocity averaging at the lock, written out by hand
    let m = params.m1 + params.m2;
    let (w1, w2) = (params.m1 / m, params.m2 / m);
    let lock = dmatrix![
        1.0, 0.0, 0.0, 0.0;
        0.0, w1, 0.0, w2;
        0.0, 0.0, 1.0, 0.0;
        0.0, w1, 0.0, w2
    ];
    let form = lock.transpose() * &p * &lock - &p;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let s: f64 = rng.random_range(-1.0..1.0);
        let x = dvector![s, rng.random_range(-1.0..1.0), s, rng.random_range(-1.0..1.0)];
        let expected = -(params.m1 * params.m2 / m) * (x[1] - x[3]).powi(2);
        worst = worst.max((quadratic(&form, &x) - expected).abs());
    }
    ensure(worst <= 1e-12, || format!("jump form deviates by {worst:e}"))?;

    let (code, _) = cli(&["check", &system_path("mechanical.json"), "--method", "theorem1"]);
    ensure(code == 0, || format!("check --method theorem1 exit code {code}"))?;
    Ok(format!("epsilon = {eps:.4}, jump form within {worst:.1e}"))
}

fn planar_decay() -> Check {
    let loaded = load("example2.json");
    let sys = &loaded.system;
    let rule = sys.jump_rule(0, 1).map_err(|e| e.to_string())?;
    let Some(Restriction::Hyperplane(normal)) = rule.restriction else {
        return Err("switching surface missing from the file".into());
    };
    let signal = SwitchingSignal::Hybrid {
        surfaces: vec![Surface { from: 0, to: 1, normal }],
        dwell: 0.2,
    };
    let traj = simulate(sys, &signal, 0, &dvector![1.0, -0.1579], (0.0, 2.0), 1e-3).map_err(|e| e.to_string())?;
    let alpha = traj.decay.as_ref().map(|d| d.alpha_hat).ok_or("no decay fit")?;
    ensure(alpha > 0.0, || format!("alpha_hat {alpha}"))?;
    ensure(!traj.events.is_empty(), || "no switches".into())?;
    let f: Vec<Matrix> = sys.modes().iter().map(|m| m.a_inv_e().clone()).collect();
    let cert = search_common_p(&f[..1], &f[1..], &SearchOptions::default()).map_err(|e| e.to_string())?;
    // the jump re-projects onto the target consistency space: allow roundoff
    let mut worst = f64::NEG_INFINITY;
    for e in &traj.events {
        let before = quadratic(&cert.p, &e.x_pre);
        worst = worst.max((quadratic(&cert.p, &e.x_post) - before) / before);
    }
    ensure(worst <= 1e-9, || format!("v grows by a factor {worst:e} at a switch"))?;
    Ok(format!(
        "alpha_hat = {alpha:.3}, {} switches, max relative change of v {worst:.1e}",
        traj.events.len()
    ))
}

fn index_reduction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..100 {
        let dim = rng.random_range(2..=6usize);
        let k = rng.random_range(1..=dim.min(3));
        let g = qw_pair(&mut rng, dim, k, true);
        let pair = DescriptorPair::new(g.e.clone(), g.a.clone()).map_err(|e| format!("case {case}: {e}"))?;
        ensure(pair.index() == k, || {
            format!("case {case}: index {} built as {k}", pair.index())
        })?;
        let sys = SwitchedSystem::new(vec![pair]).map_err(|e| e.to_string())?;
        let (reduced, _) = reduce_order(&sys, None).map_err(|e| format!("case {case}: {e}"))?;
        let got = reduced.mode(0).index();
        ensure(got == k - 1, || {
            format!("case {case} (dim {dim}, index {k}): reduced index {got}")
        })?;
    }
    Ok("100/100 pairs drop exactly one index".into())
}

fn kernel_lemma() -> Check {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let n = rng.random_range(2..=6usize);
        let r = rng.random_range(1..n);
        let (a, b) = kernel_lemma_instance(&mut rng, n, r);
        let got = interlacing_kernel_check(&a, &b, &tol);
        ensure(got == Ok(true), || format!("case {case}: {got:?}"))?;
    }
    let mut violators = 0;
    for case in 0..30 {
        let n = 2 + case % 5;
        let (a, b) = kernel_lemma_instance(&mut rng, n, 1 + n / 3);
        let rank_bad = &b + gaussian(&mut rng, n, n) + identity(n) * 3.0;
        let got = interlacing_kernel_check(&rank_bad, &b, &tol);
        ensure(matches!(got, Err(Error::RankMismatch { .. })), || {
            format!("rank case {case}: {got:?}")
        })?;
        let pd_bad = &b * 2.0 - &a;
        let got = interlacing_kernel_check(&pd_bad, &b, &tol);
        ensure(matches!(got, Err(Error::NotPD { .. })), || {
            format!("definiteness case {case}: {got:?}")
        })?;
        let q = orthogonal(&mut rng, n);
        let mut a0 = identity(n);
        a0[(1, 0)] = -1.0;
        let mut b0 = Matrix::zeros(n, n);
        b0[(0, 1)] = 1.0;
        let got = interlacing_kernel_check(&(&q * a0 * q.transpose()), &(&q * b0 * q.transpose()), &tol);
        ensure(matches!(got, Err(Error::NotPSD { .. })), || {
            format!("semidefinite case {case}: {got:?}")
        })?;
        violators += 3;
    }
    Ok(format!(
        "100 kernel equalities, {violators} violators reported by precondition"
    ))
}

fn lyapunov_soundness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut valid, mut invalid) = (0, 0);
    for case in 0..100 {
        let dim = rng.random_range(2..=5usize);
        let k = rng.random_range(0..=2usize.min(dim - 1));
        let g = qw_pair(&mut rng, dim, k, true);
        let pair = DescriptorPair::new(g.e.clone(), g.a.clone()).map_err(|e| e.to_string())?;
        let p = match case % 3 {
            0 => lyapunov_for(&mut rng, &g),
            1 => random_symmetric(&mut rng, dim),
            _ => {
                let p = lyapunov_for(&mut rng, &g);
                let low = symmetric_eigenvalues(&p).map_err(|e| e.to_string())?[0];
                p - identity(dim) * (rng.random_range(0.0..1.5) * low)
            }
        };
        let (direct, _) = verify_lyapunov_matrix(&pair, &p).map_err(|e| e.to_string())?;
        let finsler = finsler_certificate(&pair, &p).is_ok_and(|c| c.all_margins_pass());
        ensure(direct == finsler, || {
            format!("case {case}: direct {direct}, finsler {finsler}")
        })?;
        if direct {
            valid += 1;
        } else {
            invalid += 1;
        }
    }
    let mut found = 0;
    for case in 0..40 {
        let dim = rng.random_range(2..=4usize);
        let strict: Vec<Matrix> = (0..rng.random_range(1..=2usize))
            .map(|_| {
                let g = qw_pair(&mut rng, dim, 0, true);
                g.a.try_inverse().unwrap() * g.e
            })
            .collect();
        let nonstrict: Vec<Matrix> = (0..case % 2)
            .map(|_| {
                let g = qw_pair(&mut rng, dim, 1, true);
                g.a.try_inverse().unwrap() * g.e
            })
            .collect();
        match search_common_p(&strict, &nonstrict, &SearchOptions::default()) {
            Ok(cert) => {
                let margins =
                    verify_common_p(&cert.p, &strict, &nonstrict, &Tolerances::default()).map_err(|e| e.to_string())?;
                ensure(margins.iter().all(|m| m.passed()), || {
                    format!("search case {case}: {margins:?}")
                })?;
                found += 1;
            }
            Err(Error::CertificateNotFound { .. }) => {}
            Err(e) => return Err(format!("search case {case}: {e}")),
        }
    }
    ensure(valid > 0 && invalid > 0 && found > 0, || {
        format!("{valid} valid, {invalid} invalid, {found} found")
    })?;
    Ok(format!(
        "100 agree ({valid} valid, {invalid} not), {found}/40 searched P re-verify"
    ))
}

fn co_simulation() -> Check {
    let loaded = load("example3.json");
    let sys = &loaded.system;
    let decomps = loaded
        .decompositions
        .as_deref()
        .ok_or("no decompositions in the file")?;
    let (reduced, data) = reduce_order(sys, Some(decomps)).map_err(|e| e.to_string())?;
    let (k1, k2, _) = constants();
    let cz = dvector![k1 * k2, 1.0];
    let hybrid = |normal: Vector| SwitchingSignal::Hybrid {
        surfaces: vec![Surface { from: 0, to: 1, normal }],
        dwell: 0.2,
    };
    let z0 = dvector![1.0, -0.1579];
    let x0 = &data.t[0] * &z0;
    let tx = simulate(sys, &hybrid(&decomps[0].1 * &cz), 0, &x0, (0.0, 2.0), 1e-3).map_err(|e| e.to_string())?;
    let tz = simulate(&reduced, &hybrid(cz), 0, &z0, (0.0, 2.0), 1e-3).map_err(|e| e.to_string())?;
    ensure(tx.samples.len() == tz.samples.len(), || "sample grids differ".into())?;
    ensure(!tx.events.is_empty(), || "no switches".into())?;
    let (mut lift, mut down) = (0.0f64, 0.0f64);
    for (a, b) in tx.samples.iter().zip(&tz.samples) {
        ensure(a.mode == b.mode, || format!("modes differ at t = {}", a.t))?;
        lift = lift.max((&a.x - &data.t[a.mode] * &b.x).amax());
        down = down.max((&b.x - data.y[a.mode].transpose() * &a.x).amax());
    }
    ensure(lift <= 1e-6 && down <= 1e-6, || {
        format!("|x - Tz| = {lift:e}, |z - Y'x| = {down:e}")
    })?;
    Ok(format!(
        "|x - T z| = {lift:.1e}, |z - Y'x| = {down:.1e}, {} switches",
        tx.events.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("planar spectral test", 1.0, planar_spectral),
        ("planar structure", 1.0, planar_structure),
        ("three-state reduction", 1.0, three_state_reduction),
        ("mechanical certificate", 5.0, mechanical_certificate),
        ("planar hybrid decay", 5.0, planar_decay),
        ("index reduction", 30.0, index_reduction),
        ("kernel lemma", 30.0, kernel_lemma),
        ("Lyapunov equivalence and search", 60.0, lyapunov_soundness),
        ("co-simulation", 5.0, co_simulation),
    ];
    let mut failed = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match result {
            Ok(d) if secs <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name} [{secs:.3} s / {limit} s] {detail}",
            k + 1,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
