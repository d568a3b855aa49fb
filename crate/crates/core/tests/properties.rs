use descr_switch::lyapunov::{
    finsler_certificate, interlacing_kernel_check, search_common_p, verify_common_p, verify_lyapunov_matrix,
    SearchOptions,
};
use descr_switch::matkit::{full_rank_decomposition, identity, image_basis, solve};
use descr_switch::random::{
    conditioned, gaussian, kernel_lemma_instance, lyapunov_for, orthogonal, qw_pair, random_symmetric,
};
use descr_switch::sim::{
    build_example3, build_mechanical, find_epsilon, mechanical_p, simulate, MechanicalParams, Surface, SwitchingSignal,
};
use descr_switch::switched::{check_theorem1, reduce_order, spectral_test_index01, spectral_test_index12, JumpRule};
use descr_switch::{DescriptorPair, Error, Matrix, SwitchedSystem, Tolerances, Vector};
use nalgebra::dmatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random full-rank factors of `E`: the SVD factors mixed by a random `G`.
fn random_factors(r: &mut ChaCha8Rng, e: &Matrix) -> (Matrix, Matrix) {
    let (x, y) = full_rank_decomposition(e, None).unwrap();
    let g = conditioned(r, x.ncols(), 0.5, 2.0);
    let g_inv_t = g.clone().try_inverse().unwrap().transpose();
    (x * g, y * g_inv_t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduction_drops_index_and_pushes_consistency_forward(seed in any::<u64>(), dim in 2usize..=6, k in 1usize..=3) {
        prop_assume!(k <= dim);
        let mut r = rng(seed);
        let g = qw_pair(&mut r, dim, k, false);
        let pair = DescriptorPair::new(g.e.clone(), g.a.clone()).unwrap();
        prop_assert_eq!(pair.index(), k);
        let sys = SwitchedSystem::new(vec![pair.clone()]).unwrap();
        let decomp = random_factors(&mut r, &g.e);
        let (reduced, data) = reduce_order(&sys, Some(&[decomp])).unwrap();
        prop_assert_eq!(reduced.mode(0).index(), k - 1);
        // C(Etilde, I) = Y' C
        let pushed = image_basis(&(data.y[0].transpose() * pair.consistency().basis()), Some(1e-10)).unwrap();
        let c_red = reduced.mode(0).consistency();
        prop_assert_eq!(pushed.dim(), c_red.dim());
        if c_red.dim() > 0 {
            prop_assert!(pushed.same_as(c_red, 1e-8));
        }
        // lifting recovers consistent states
        if c_red.dim() > 0 {
            let z = c_red.basis() * Vector::from_fn(c_red.dim(), |_, _| r.random_range(-1.0..1.0));
            let x = data.lift_state(0, &z);
            prop_assert!(pair.consistency().distance(&x) <= 1e-8 * x.norm().max(1.0));
            prop_assert!((data.reduce_state(0, &x) - &z).amax() <= 1e-8 * z.amax().max(1.0));
        }
    }

    #[test]
    fn spectral12_verdict_ignores_the_decomposition(seed in any::<u64>()) {
        let mut r = rng(seed);
        let ex3 = build_example3().unwrap();
        let g = conditioned(&mut r, 2, 0.5, 2.0);
        let g_inv_t = g.clone().try_inverse().unwrap().transpose();
        let mixed: Vec<(Matrix, Matrix)> = ex3.decomps.iter().map(|(x, y)| (x * &g_inv_t, y * &g)).collect();
        let base = spectral_test_index12(&ex3.system, Some(&ex3.decomps)).unwrap();
        let other = spectral_test_index12(&ex3.system, Some(&mixed)).unwrap();
        prop_assert_eq!(base.status, other.status);
        prop_assert!(other.certified());
        let (l0, l1) = (&base.product_eigenvalues, &other.product_eigenvalues);
        for (a, b) in l0.iter().zip(l1) {
            prop_assert!((a[0] - b[0]).abs() + (a[1] - b[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn spectral12_matches_spectral01_on_the_reduction(seed in any::<u64>(), dim in 3usize..=5) {
        let mut r = rng(seed);
        let m0 = qw_pair(&mut r, dim, 1, true);
        let m1 = qw_pair(&mut r, dim, 2, true);
        let modes = vec![
            DescriptorPair::new(m0.e.clone(), m0.a.clone()).unwrap(),
            DescriptorPair::new(m1.e.clone(), m1.a.clone()).unwrap(),
        ];
        let rank0 = descr_switch::matkit::rank(&m0.e, None).unwrap();
        let rank1 = descr_switch::matkit::rank(&m1.e, None).unwrap();
        prop_assume!(rank0 == rank1);
        let sys = SwitchedSystem::new(modes).unwrap();
        let decomps = vec![random_factors(&mut r, &m0.e), random_factors(&mut r, &m1.e)];
        let v12 = spectral_test_index12(&sys, Some(&decomps)).unwrap();
        let (reduced, _) = reduce_order(&sys, Some(&decomps)).unwrap();
        let v01 = spectral_test_index01(&reduced).unwrap();
        prop_assert_eq!(v12.status, v01.status);
        if v01.certified() {
            prop_assert!(v01.certificates.iter().all(|c| c.all_margins_pass()));
        }
    }

    #[test]
    fn interlacing_kernels_agree(seed in any::<u64>(), n in 2usize..=6, frac in 0.0f64..1.0) {
        let mut r = rng(seed);
        let rank_b = 1 + ((n - 1) as f64 * frac) as usize % (n - 1).max(1);
        let (a, b) = kernel_lemma_instance(&mut r, n, rank_b.min(n - 1));
        prop_assert_eq!(interlacing_kernel_check(&a, &b, &Tolerances::default()), Ok(true));
    }

    #[test]
    fn finsler_agrees_with_direct_verification(seed in any::<u64>(), dim in 2usize..=5, k in 0usize..=2, kind in 0u8..3) {
        prop_assume!(k < dim);
        let mut r = rng(seed);
        let g = qw_pair(&mut r, dim, k, true);
        let pair = DescriptorPair::new(g.e.clone(), g.a.clone()).unwrap();
        let p = lyapunov_instance(&mut r, &g, kind);
        let (direct, _) = verify_lyapunov_matrix(&pair, &p).unwrap();
        let finsler = finsler_certificate(&pair, &p).is_ok_and(|c| c.all_margins_pass());
        prop_assert_eq!(direct, finsler);
    }

    #[test]
    fn searched_certificates_reverify(seed in any::<u64>(), dim in 2usize..=4, modes in 1usize..=3) {
        let mut r = rng(seed);
        let fs: Vec<Matrix> = (0..modes)
            .map(|_| {
                let g = qw_pair(&mut r, dim, 0, true);
                solve(&g.a, &g.e).unwrap()
            })
            .collect();
        match search_common_p(&fs, &[], &SearchOptions::default()) {
            Ok(cert) => {
                let margins = verify_common_p(&cert.p, &fs, &[], &Tolerances::default()).unwrap();
                prop_assert!(margins.iter().all(|m| m.passed() && m.value > 0.0));
            }
            Err(e) => prop_assert!(matches!(e, Error::CertificateNotFound { .. }), "{}", e),
        }
    }

    #[test]
    fn simulation_stays_consistent(seed in any::<u64>(), dim in 2usize..=5) {
        let mut r = rng(seed);
        let k0 = r.random_range(0..=1usize);
        let m0 = qw_pair(&mut r, dim, k0, true);
        let k1 = 1 + r.random_range(0..=1usize).min(dim - 1);
        let m1 = qw_pair(&mut r, dim, k1, true);
        let p0 = DescriptorPair::new(m0.e.clone(), m0.a.clone()).unwrap();
        let p1 = DescriptorPair::new(m1.e.clone(), m1.a.clone()).unwrap();
        // jumps project onto the target consistency space
        let j01 = p1.analysis().projector.clone();
        let j10 = p0.analysis().projector.clone();
        let sys = SwitchedSystem::new(vec![p0.clone(), p1])
            .unwrap()
            .with_continuous_default(false)
            .with_jump(0, 1, JumpRule::new(j01, None))
            .unwrap()
            .with_jump(1, 0, JumpRule::new(j10, None))
            .unwrap();
        let x0 = p0.consistency().project(&Vector::from_fn(dim, |_, _| r.random_range(-1.0..1.0)));
        prop_assume!(x0.norm() > 1e-3);
        let traj = simulate(&sys, &SwitchingSignal::Periodic(vec![0.13, 0.07]), 0, &x0, (0.0, 1.0), 1e-2).unwrap();
        for s in &traj.samples {
            prop_assert!(sys.mode(s.mode).consistency().distance(&s.x) <= 1e-7 * x0.norm());
        }
    }

    #[test]
    fn mechanical_jump_form_is_a_velocity_mismatch(m1 in 0.1f64..10.0, m2 in 0.1f64..10.0, x in prop::array::uniform3(-5.0f64..5.0), eps in 0.0f64..1.0) {
        let params = MechanicalParams { m1, m2, ..Default::default() };
        let p = mechanical_p(&params, eps);
        let m = params.lock_map();
        let state = Vector::from_vec(vec![x[0], x[1], x[0], x[2]]);
        let form = (state.transpose() * (m.transpose() * &p * &m - &p) * &state)[0];
        let expected = -(m1 * m2 / (m1 + m2)) * (x[1] - x[2]).powi(2);
        prop_assert!((form - expected).abs() <= 1e-12 * (1.0 + expected.abs() + state.norm_squared()));
    }

    #[test]
    fn certified_lock_up_never_gains_energy_at_jumps(c in 0.3f64..2.0, k in 0.5f64..3.0, v0 in 0.1f64..2.0) {
        let params = MechanicalParams { c1: c, c2: 0.5 * c, k1: k, k2: 1.5 * k, ..Default::default() };
        let eps = find_epsilon(&params).unwrap();
        let (sys, _) = build_mechanical(&params).unwrap();
        let p = mechanical_p(&params, eps);
        prop_assert!(check_theorem1(&sys, &[p.clone(), p.clone()]).unwrap().certified());
        let signal = SwitchingSignal::Hybrid {
            surfaces: vec![Surface { from: 0, to: 1, normal: Vector::from_vec(vec![1.0, 0.0, -1.0, 0.0]) }],
            dwell: 0.4,
        };
        let x0 = Vector::from_vec(vec![1.0, 0.0, -1.0, v0]);
        let traj = simulate(&sys, &signal, 0, &x0, (0.0, 6.0), 1e-3).unwrap();
        let v = |x: &Vector| (x.transpose() * &p * x)[0];
        for e in &traj.events {
            prop_assert!(v(&e.x_post) <= v(&e.x_pre) * (1.0 + 1e-10));
        }
    }
}

/// `kind` 0: a valid matrix, 1: random symmetric, 2: a valid one shifted
/// down by a random amount (valid or not).
fn lyapunov_instance(r: &mut ChaCha8Rng, g: &descr_switch::random::QwPair, kind: u8) -> Matrix {
    let dim = g.e.nrows();
    match kind {
        0 => lyapunov_for(r, g),
        1 => random_symmetric(r, dim),
        _ => {
            let p = lyapunov_for(r, g);
            let shift = r.random_range(0.0..1.5) * descr_switch::matkit::symmetric_eigenvalues(&p).unwrap()[0];
            p - identity(dim) * shift
        }
    }
}

#[test]
fn halving_the_step_shows_fourth_order() {
    let mut r = rng(11);
    for dim in 2..=5 {
        let g = qw_pair(&mut r, dim, 1, true);
        let pair = DescriptorPair::new(g.e.clone(), g.a.clone()).unwrap();
        let sys = SwitchedSystem::new(vec![pair.clone()]).unwrap();
        let x0 = pair.consistency().project(&Vector::from_element(dim, 1.0));
        let exact = (pair.analysis().restricted_a.clone() * 1.0).exp() * &x0;
        let signal = SwitchingSignal::Periodic(vec![10.0]);
        let err = |dt: f64| {
            let t = simulate(&sys, &signal, 0, &x0, (0.0, 1.0), dt).unwrap();
            (&t.samples.last().unwrap().x - &exact).norm()
        };
        let (e1, e2) = (err(0.1), err(0.05));
        let order = (e1 / e2).log2();
        assert!(order >= 3.5, "dim {dim}: order {order} ({e1:e}, {e2:e})");
    }
}

#[test]
fn violated_lemma_hypotheses_are_reported() {
    let tol = Tolerances::default();
    let mut r = rng(21);
    for n in 2..=6 {
        let rank_b = 1 + n / 3;
        let (a, b) = kernel_lemma_instance(&mut r, n, rank_b);
        // full-rank difference breaks the rank identity
        let a_bad = &b + gaussian(&mut r, n, n) + identity(n) * 3.0;
        assert!(matches!(
            interlacing_kernel_check(&a_bad, &b, &tol),
            Err(Error::RankMismatch { .. })
        ));
        // same difference subtracted: rank identity kept, A + A' indefinite
        let a_neg = &b * 2.0 - &a;
        assert!(matches!(
            interlacing_kernel_check(&a_neg, &b, &tol),
            Err(Error::NotPD { .. })
        ));
        // a nilpotent B with an indefinite symmetric part
        let q = orthogonal(&mut r, n);
        let mut core_a = identity(n);
        core_a[(1, 0)] = -1.0;
        let mut core_b = Matrix::zeros(n, n);
        core_b[(0, 1)] = 1.0;
        let (a2, b2) = (&q * core_a * q.transpose(), &q * core_b * q.transpose());
        assert!(matches!(
            interlacing_kernel_check(&a2, &b2, &tol),
            Err(Error::NotPSD { .. })
        ));
    }
    // a precondition failure is never turned into a verdict
    let a = dmatrix![1.0, 0.0; 0.0, -1.0];
    let b = Matrix::zeros(2, 2);
    assert!(interlacing_kernel_check(&a, &b, &tol).is_err());
}
