use std::f64::consts::PI;

use descr_switch::lyapunov::{search_common_p, verify_lyapunov_matrix, SearchOptions};
use descr_switch::matkit::{identity, spectral_norm, symmetric_eigenvalues};
use descr_switch::sim::{
    build_example2, build_example3, build_mechanical, find_epsilon, fit_decay, mechanical_p, simulate,
    MechanicalParams, Surface, SwitchingSignal,
};
use descr_switch::switched::{
    admissible_entry_space, check_rank_condition, check_theorem1, impulse_free_condition, reduce_order,
    spectral_test_index01, spectral_test_index12, JumpRule, VerdictStatus,
};
use descr_switch::{DescriptorPair, Error, Matrix, SwitchedSystem};
use nalgebra::{dmatrix, dvector};

#[test]
fn planar_pair_difference_is_rank_one() {
    let ex = build_example2().unwrap();
    let f0 = ex.system.mode(0).a_inv_e();
    let f1 = ex.system.mode(1).a_inv_e();
    let gh = &ex.g * ex.h.transpose();
    assert!((f0 - f1 - gh).abs().max() < 1e-9);
    // consistency line of mode 1
    let c = ex.system.mode(1).consistency().basis().column(0).into_owned();
    assert!((c[1] / c[0] + ex.k1 * ex.k2).abs() < 1e-12);
    assert_eq!(format!("{:.4}", -ex.k1 * ex.k2), "-0.1579");
}

#[test]
fn planar_pair_spectral_test() {
    let ex = build_example2().unwrap();
    let v = spectral_test_index01(&ex.system).unwrap();
    assert_eq!(v.status, VerdictStatus::GuesCertified, "{:#?}", v.diagnostics);
    let mags: Vec<f64> = v.product_eigenvalues.iter().map(|l| l[0].hypot(l[1])).collect();
    assert!(mags[0] < 1e-8);
    assert!((mags[1] - 0.0042).abs() < 5e-4);
    // a common P exists whenever the spectral test certifies
    assert_eq!(v.certificates.len(), 1);
    assert!(v.certificates[0].all_margins_pass());
}

#[test]
fn spectral_test_is_label_independent() {
    let ex = build_example2().unwrap();
    let swapped = SwitchedSystem::new(vec![ex.system.mode(1).clone(), ex.system.mode(0).clone()]).unwrap();
    assert!(spectral_test_index01(&swapped).unwrap().certified());
}

#[test]
fn equal_indices_violate_spectral_hypothesis() {
    let m = DescriptorPair::new(identity(2), dmatrix![-1.0, 1.0; -1.0, -1.0]).unwrap();
    let sys = SwitchedSystem::new(vec![m.clone(), m]).unwrap();
    let v = spectral_test_index01(&sys).unwrap();
    assert_eq!(v.status, VerdictStatus::HypothesisViolated);
    assert!(!v.diagnostic("(b) indices are 0 and 1").unwrap().passed);
}

#[test]
fn double_zero_product_eigenvalue_rejected() {
    // index-1 mode 1 with a two-dimensional kernel in a 3-state system
    let m0 = DescriptorPair::new(identity(3), -identity(3)).unwrap();
    let e = Matrix::from_diagonal(&dvector![1.0, 0.0, 0.0]);
    let m1 = DescriptorPair::new(e, -identity(3)).unwrap();
    assert_eq!(m1.index(), 1);
    let sys = SwitchedSystem::new(vec![m0, m1]).unwrap();
    let v = spectral_test_index01(&sys).unwrap();
    assert_eq!(v.status, VerdictStatus::HypothesisViolated);
    assert!(!v.diagnostic("(d) exactly one zero eigenvalue").unwrap().passed);
}

#[test]
fn rank_condition_test_on_planar_pair() {
    let ex = build_example2().unwrap();
    let v = check_rank_condition(&ex.system).unwrap();
    assert_eq!(v.status, VerdictStatus::GuesCertified, "{:#?}", v.diagnostics);
}

#[test]
fn rank_condition_gap_reported() {
    // F0 - F1 has rank 2 while rank F0 - rank F1 = 1
    let m0 = DescriptorPair::new(identity(2), -identity(2)).unwrap();
    let m1 = DescriptorPair::new(dmatrix![0.0, 1.0; 0.0, 0.0], -identity(2)).unwrap();
    let sys = SwitchedSystem::new(vec![m0, m1]).unwrap();
    let v = check_rank_condition(&sys).unwrap();
    assert_eq!(v.status, VerdictStatus::NoCertificate);
    let d = v.diagnostic("rank identity for mode 1").unwrap();
    assert!(!d.passed && d.detail.contains("(1,0)"));
}

#[test]
fn three_state_reduction_reproduces_planar_pair() {
    let ex3 = build_example3().unwrap();
    let ex2 = build_example2().unwrap();
    let (reduced, data) = reduce_order(&ex3.system, Some(&ex3.decomps)).unwrap();
    for k in 0..2 {
        let diff = (&data.e_tilde[k] - ex2.system.mode(k).a_inv_e()).abs().max();
        assert!(diff < 1e-10, "mode {k}: {diff}");
        assert_eq!(reduced.mode(k).index() + 1, ex3.system.mode(k).index());
    }
    let v = spectral_test_index12(&ex3.system, Some(&ex3.decomps)).unwrap();
    assert!(v.certified(), "{:#?}", v.diagnostics);
    // the verdict does not depend on which decomposition is used
    let v = spectral_test_index12(&ex3.system, None).unwrap();
    assert!(v.certified(), "{:#?}", v.diagnostics);
}

#[test]
fn entry_space_of_index_two_mode_is_a_line() {
    let ex3 = build_example3().unwrap();
    let (x, y) = &ex3.decomps[1];
    assert_eq!(admissible_entry_space(&ex3.system, 1, Some((x, y))).unwrap().dim(), 1);
    let (x, y) = &ex3.decomps[0];
    assert_eq!(admissible_entry_space(&ex3.system, 0, Some((x, y))).unwrap().dim(), 2);
}

#[test]
fn reducing_twice_is_refused() {
    let ex3 = build_example3().unwrap();
    let (reduced, _) = reduce_order(&ex3.system, None).unwrap();
    match reduce_order(&reduced, None) {
        Err(Error::DecompositionMismatch(msg)) => assert!(msg.contains("nothing to reduce"), "{msg}"),
        other => panic!("expected a mismatch, got {other:?}"),
    }
}

#[test]
fn mechanical_certificate() {
    let params = MechanicalParams::default();
    let eps = find_epsilon(&params).unwrap();
    assert!(eps > 0.0);
    let (sys, _) = build_mechanical(&params).unwrap();
    let p = mechanical_p(&params, eps);
    let v = check_theorem1(&sys, &[p.clone(), p]).unwrap();
    assert!(v.certified(), "{:#?}", v.diagnostics);
    assert!(v.alpha.unwrap() > 0.0);
    // informational only
    let _ = impulse_free_condition(&sys, 0, 1).unwrap();
}

#[test]
fn doubling_jump_violates_hypothesis() {
    let m = DescriptorPair::new(identity(2), -identity(2)).unwrap();
    let sys = SwitchedSystem::new(vec![m.clone(), m])
        .unwrap()
        .with_jump(0, 1, JumpRule::new(identity(2) * 2.0, None))
        .unwrap();
    let v = check_theorem1(&sys, &[identity(2), identity(2)]).unwrap();
    assert_eq!(v.status, VerdictStatus::HypothesisViolated);
    assert!(!v.diagnostic("jump 0->1: M'P M - P <= 0").unwrap().passed);
}

fn planar_hybrid(ex: &descr_switch::sim::Example2) -> SwitchingSignal {
    SwitchingSignal::Hybrid {
        surfaces: vec![Surface {
            from: 0,
            to: 1,
            normal: dvector![ex.k1 * ex.k2, 1.0],
        }],
        dwell: 0.2,
    }
}

#[test]
fn planar_hybrid_run_decays() {
    let ex = build_example2().unwrap();
    let traj = simulate(
        &ex.system,
        &planar_hybrid(&ex),
        0,
        &dvector![1.0, -0.1579],
        (0.0, 2.0),
        1e-3,
    )
    .unwrap();
    assert!(traj.events.len() >= 2, "{} events", traj.events.len());
    assert!(traj.samples.iter().any(|s| s.mode == 1));
    let fit = fit_decay(&traj).unwrap();
    assert!(fit.alpha_hat > 0.0);

    let f: Vec<Matrix> = (0..2).map(|k| ex.system.mode(k).a_inv_e().clone()).collect();
    let cert = search_common_p(&f[..1], &f[1..], &SearchOptions::default()).unwrap();
    let v = |x: &descr_switch::Vector| (x.transpose() * &cert.p * x)[0];
    for e in &traj.events {
        assert!(v(&e.x_post) <= v(&e.x_pre) * (1.0 + 1e-9) + 1e-15);
    }
    for w in traj.samples.windows(2) {
        if w[0].mode == w[1].mode && w[1].t > w[0].t {
            assert!(v(&w[1].x) < v(&w[0].x));
        }
    }
}

#[test]
fn mechanical_lock_conserves_momentum() {
    let params = MechanicalParams::default();
    let (sys, _) = build_mechanical(&params).unwrap();
    let signal = SwitchingSignal::Hybrid {
        surfaces: vec![Surface {
            from: 0,
            to: 1,
            normal: dvector![1.0, 0.0, -1.0, 0.0],
        }],
        dwell: 0.5,
    };
    let traj = simulate(&sys, &signal, 0, &dvector![1.0, 0.0, -1.0, 0.5], (0.0, 10.0), 1e-3).unwrap();
    let locks: Vec<_> = traj.events.iter().filter(|e| e.to == 1).collect();
    assert!(!locks.is_empty());
    for e in locks {
        let before = params.m1 * e.x_pre[1] + params.m2 * e.x_pre[3];
        assert!((before - params.m() * e.x_post[1]).abs() < 1e-12 * before.abs().max(1.0));
        assert!((e.x_post[1] - e.x_post[3]).abs() < 1e-12);
    }
}

#[test]
fn three_state_co_simulation() {
    let ex3 = build_example3().unwrap();
    let (reduced, data) = reduce_order(&ex3.system, Some(&ex3.decomps)).unwrap();
    let (k1, k2) = (PI - 1.0, 1.0 / (4.0 * PI + 1.0));
    let cz = dvector![k1 * k2, 1.0];
    let y0 = &ex3.decomps[0].1;
    let sig_x = SwitchingSignal::Hybrid {
        surfaces: vec![Surface {
            from: 0,
            to: 1,
            normal: y0 * &cz,
        }],
        dwell: 0.2,
    };
    let sig_z = SwitchingSignal::Hybrid {
        surfaces: vec![Surface {
            from: 0,
            to: 1,
            normal: cz.clone(),
        }],
        dwell: 0.2,
    };
    let z0 = dvector![1.0, -0.1579];
    let x0 = &data.t[0] * &z0;
    let tx = simulate(&ex3.system, &sig_x, 0, &x0, (0.0, 2.0), 1e-3).unwrap();
    let tz = simulate(&reduced, &sig_z, 0, &z0, (0.0, 2.0), 1e-3).unwrap();
    assert_eq!(tx.samples.len(), tz.samples.len());
    assert!(!tx.events.is_empty());
    for (a, b) in tx.samples.iter().zip(&tz.samples) {
        assert!((a.t - b.t).abs() < 1e-8);
        assert_eq!(a.mode, b.mode);
        let lift = (&a.x - &data.t[a.mode] * &b.x).amax();
        let down = (&b.x - data.y[a.mode].transpose() * &a.x).amax();
        assert!(lift <= 1e-6 && down <= 1e-6, "t = {}: {lift:e} {down:e}", a.t);
    }
}

#[test]
fn certificates_bound_planar_lyapunov_decay() {
    let ex = build_example2().unwrap();
    let v = spectral_test_index01(&ex.system).unwrap();
    let p = &v.certificates[0].p;
    for k in 0..2 {
        let (ok, decay) = verify_lyapunov_matrix(ex.system.mode(k), p).unwrap();
        assert!(ok && decay.alpha > 0.0);
    }
    assert!(symmetric_eigenvalues(p).unwrap()[0] > 0.0);
    assert!((spectral_norm(p) - 1.0).abs() < 1e-12);
}
