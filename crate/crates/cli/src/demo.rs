//! End-to-end runs on the built-in reference systems.

use std::path::Path;

use descr_switch::lyapunov::{search_common_p, SearchOptions};
use descr_switch::sim::{
    build_example2, build_example3, build_mechanical, find_epsilon, fit_decay, mechanical_p, simulate, Event,
    MechanicalParams, Surface, SwitchingSignal,
};
use descr_switch::switched::{
    check_rank_condition, check_theorem1, reduce_order, spectral_test_index01, spectral_test_index12,
};
use descr_switch::{Matrix, Vector};
use nalgebra::dvector;

use crate::error::CliError;
use crate::files::SystemFile;
use crate::{DemoName, Output};

struct Table {
    rows: Vec<(bool, String, String)>,
}

impl Table {
    fn check(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.rows.push((ok, name.into(), detail.into()));
    }

    /// Records a failed step instead of aborting the demo.
    fn attempt<T>(&mut self, name: &str, r: Result<T, descr_switch::Error>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.check(name, false, e.to_string());
                None
            }
        }
    }

    fn render(&self, title: &str) -> String {
        let width = self.rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
        let mut out = format!("demo {title}\n");
        for (ok, name, detail) in &self.rows {
            out.push_str(&format!(
                "  {}  {name:<width$}  {detail}\n",
                if *ok { "PASS" } else { "FAIL" }
            ));
        }
        let passed = self.rows.iter().filter(|r| r.0).count();
        out.push_str(&format!("{passed}/{} checks passed\n", self.rows.len()));
        out
    }

    fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.0)
    }
}

fn quadratic(p: &Matrix, x: &Vector) -> f64 {
    (x.transpose() * p * x)[0]
}

/// `(v+ - v-) / v-`; the post-jump state is projected onto the target
/// consistency space, so identity jumps show roundoff-level gains.
fn relative_gain(p: &Matrix, e: &Event) -> f64 {
    let before = quadratic(p, &e.x_pre);
    (quadratic(p, &e.x_post) - before) / before.max(f64::MIN_POSITIVE)
}

fn example2(t: &mut Table) -> Option<SystemFile> {
    let ex = t.attempt("build", build_example2())?;
    let sys = &ex.system;
    t.check(
        "mode indices are 0 and 1",
        sys.indices() == [0, 1],
        format!("{:?}", sys.indices()),
    );

    let line = dvector![ex.k1 * ex.k2, 1.0];
    let c = sys.mode(1).consistency();
    let off = (c.basis().transpose() * &line).amax() / line.norm();
    let x2 = -ex.k1 * ex.k2;
    t.check(
        "mode 1 is consistent on k1 k2 x1 + x2 = 0",
        c.dim() == 1 && off < 1e-10 && format!("{x2:.4}") == "-0.1579",
        format!("x2 = {x2:.4} at x1 = 1"),
    );

    let v = t.attempt("spectral01", spectral_test_index01(sys))?;
    let mut mags: Vec<f64> = v.product_eigenvalues.iter().map(|[re, im]| re.hypot(*im)).collect();
    mags.sort_by(f64::total_cmp);
    let eig_ok = mags.len() == 2 && mags[0] < 1e-8 && (mags[1] - 0.0042).abs() < 5e-4;
    t.check("spectral01 certifies", v.certified(), format!("{:?}", v.status));
    t.check(
        "product eigenvalues {0, 0.0042}",
        eig_ok,
        mags.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(", "),
    );

    let r = t.attempt("rank condition", check_rank_condition(sys))?;
    t.check("rank condition certifies", r.certified(), format!("{:?}", r.status));

    let signal = SwitchingSignal::Hybrid {
        surfaces: vec![Surface {
            from: 0,
            to: 1,
            normal: line,
        }],
        dwell: 0.2,
    };
    let traj = t.attempt(
        "simulate",
        simulate(sys, &signal, 0, &dvector![1.0, -0.1579], (0.0, 2.0), 1e-3),
    )?;
    let fit = fit_decay(&traj);
    t.check(
        "hybrid run with T = 0.2 decays",
        fit.as_ref().is_ok_and(|f| f.alpha_hat > 0.0),
        match &fit {
            Ok(f) => format!("alpha_hat = {:.4}, {} switches", f.alpha_hat, traj.events.len()),
            Err(e) => e.to_string(),
        },
    );
    let f: Vec<Matrix> = sys.modes().iter().map(|m| m.a_inv_e().clone()).collect();
    let cert = t.attempt(
        "common P search",
        search_common_p(&f[..1], &f[1..], &SearchOptions::default()),
    )?;
    let worst = traj
        .events
        .iter()
        .map(|e| relative_gain(&cert.p, e))
        .fold(f64::NEG_INFINITY, f64::max);
    t.check(
        "x'Px does not increase at switches",
        !traj.events.is_empty() && worst <= 1e-9,
        format!("largest relative change {worst:.1e}"),
    );
    Some(SystemFile::from_system(sys, Some("example2")))
}

fn example3(t: &mut Table) -> Option<SystemFile> {
    let ex = t.attempt("build", build_example3())?;
    let ex2 = t.attempt("build planar system", build_example2())?;
    let sys = &ex.system;
    t.check(
        "mode indices are 1 and 2",
        sys.indices() == [1, 2],
        format!("{:?}", sys.indices()),
    );

    let (reduced, data) = t.attempt("reduce", reduce_order(sys, Some(&ex.decomps)))?;
    let gap = (0..2)
        .map(|k| (&data.e_tilde[k] - ex2.system.mode(k).a_inv_e()).amax())
        .fold(0.0, f64::max);
    t.check(
        "reduced matrices equal the planar A^-1 E",
        gap <= 1e-10,
        format!("max gap {gap:.1e}"),
    );
    t.check(
        "reduced indices are 0 and 1",
        reduced.indices() == [0, 1],
        format!("{:?}", reduced.indices()),
    );

    let v = t.attempt("spectral12", spectral_test_index12(sys, Some(&ex.decomps)))?;
    t.check("spectral12 certifies", v.certified(), format!("{:?}", v.status));

    let cz = dvector![ex2.k1 * ex2.k2, 1.0];
    let y0 = &ex.decomps[0].1;
    let sig = |normal: Vector| SwitchingSignal::Hybrid {
        surfaces: vec![Surface { from: 0, to: 1, normal }],
        dwell: 0.2,
    };
    let z0 = dvector![1.0, -0.1579];
    let x0 = &data.t[0] * &z0;
    let tx = t.attempt("simulate full", simulate(sys, &sig(y0 * &cz), 0, &x0, (0.0, 2.0), 1e-3))?;
    let tz = t.attempt(
        "simulate reduced",
        simulate(&reduced, &sig(cz), 0, &z0, (0.0, 2.0), 1e-3),
    )?;
    let same_grid =
        tx.samples.len() == tz.samples.len() && tx.samples.iter().zip(&tz.samples).all(|(a, b)| a.mode == b.mode);
    let (mut lift, mut down) = (0.0f64, 0.0f64);
    for (a, b) in tx.samples.iter().zip(&tz.samples) {
        lift = lift.max((&a.x - &data.t[a.mode] * &b.x).amax());
        down = down.max((&b.x - data.y[a.mode].transpose() * &a.x).amax());
    }
    t.check(
        "co-simulation agrees",
        same_grid && !tx.events.is_empty() && lift <= 1e-6 && down <= 1e-6,
        format!("|x - T z| = {lift:.1e}, |z - Y'x| = {down:.1e}"),
    );
    Some(SystemFile::from_system(sys, Some("example3")).with_decompositions(&ex.decomps))
}

fn mechanical(t: &mut Table) -> Option<SystemFile> {
    let params = MechanicalParams::default();
    let (sys, _) = t.attempt("build", build_mechanical(&params))?;
    t.check(
        "mode indices are 0 and 2",
        sys.indices() == [0, 2],
        format!("{:?}", sys.indices()),
    );
    let eps = t.attempt("epsilon search", find_epsilon(&params))?;
    t.check("epsilon found", eps > 0.0, format!("epsilon = {eps:.6}"));
    let p = mechanical_p(&params, eps);
    let v = t.attempt("theorem1", check_theorem1(&sys, &[p.clone(), p.clone()]))?;
    t.check(
        "theorem1 certifies",
        v.certified(),
        format!("{:?}, alpha = {:.4}", v.status, v.alpha.unwrap_or(f64::NAN)),
    );

    // low-discrepancy surface states x1 = x3
    let lock = params.lock_map();
    let jump_form = lock.transpose() * &p * &lock - &p;
    let reduced_mass = params.m1 * params.m2 / params.m();
    let mut worst = 0.0f64;
    for k in 1..=10_000u32 {
        let u = |a: f64| ((f64::from(k) * a).fract() - 0.5) * 10.0;
        let x = dvector![u(0.754_877_666), u(0.569_840_291), u(0.754_877_666), u(0.429_311_989)];
        let form = quadratic(&jump_form, &x);
        let expected = -reduced_mass * (x[1] - x[3]).powi(2);
        worst = worst.max((form - expected).abs() / (1.0 + x.norm_squared()));
    }
    t.check(
        "jump form is -(m1 m2/m)(x2 - x4)^2",
        worst <= 1e-12,
        format!("max deviation {worst:.1e} on 10^4 states"),
    );

    let signal = SwitchingSignal::Hybrid {
        surfaces: vec![Surface {
            from: 0,
            to: 1,
            normal: dvector![1.0, 0.0, -1.0, 0.0],
        }],
        dwell: 0.5,
    };
    let traj = t.attempt(
        "simulate",
        simulate(&sys, &signal, 0, &dvector![1.0, 0.0, -1.0, 0.5], (0.0, 10.0), 1e-3),
    )?;
    let locks: Vec<_> = traj.events.iter().filter(|e| e.to == 1).collect();
    let momentum = locks
        .iter()
        .map(|e| {
            let before = params.m1 * e.x_pre[1] + params.m2 * e.x_pre[3];
            (before - params.m() * e.x_post[1]).abs() + (e.x_post[1] - e.x_post[3]).abs()
        })
        .fold(0.0, f64::max);
    t.check(
        "locking conserves momentum",
        !locks.is_empty() && momentum <= 1e-12,
        format!("{} locks, max error {momentum:.1e}", locks.len()),
    );
    let fit = fit_decay(&traj);
    let energy_up = traj
        .events
        .iter()
        .map(|e| relative_gain(&p, e))
        .fold(f64::NEG_INFINITY, f64::max);
    t.check(
        "lock/unlock run decays",
        fit.as_ref().is_ok_and(|f| f.alpha_hat > 0.0) && energy_up <= 1e-9,
        match &fit {
            Ok(f) => format!("alpha_hat = {:.4}", f.alpha_hat),
            Err(e) => e.to_string(),
        },
    );
    let mut file = SystemFile::from_system(&sys, Some("mechanical"));
    file.mechanical = Some(params);
    Some(file)
}

pub fn demo(name: DemoName, emit: Option<&Path>, io: &mut Output) -> Result<i32, CliError> {
    let mut table = Table { rows: Vec::new() };
    let (title, file) = match name {
        DemoName::Example2 => ("example2", example2(&mut table)),
        DemoName::Example3 => ("example3", example3(&mut table)),
        DemoName::Mechanical => ("mechanical", mechanical(&mut table)),
    };
    io.out(&table.render(title));
    if let (Some(path), Some(file)) = (emit, &file) {
        std::fs::write(path, file.to_json()).map_err(|e| CliError::io(path, e))?;
    }
    Ok(if table.all_pass() && file.is_some() { 0 } else { 1 })
}
