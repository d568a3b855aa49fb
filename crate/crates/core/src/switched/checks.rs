//! Sufficient GUES tests on a [`SwitchedSystem`].

use crate::error::{Error, Result};
use crate::lyapunov::{
    finsler_certificate, search_common_p, verify_lyapunov_matrix, CertificateMethod, LyapunovCertificate, SearchOptions,
};
use crate::matkit::{
    controllable, eigenvalues, hypothesis_rank_tol, identity, numerical_rank, observable, pd_on_subspace,
    spectral_norm, svd, symmetric_part, Definiteness, Matrix, Vector,
};

use super::verdict::{Diagnostic, StabilityVerdict, TheoremTag, VerdictStatus};
use super::SwitchedSystem;

fn rank_rel(m: &Matrix, sys: &SwitchedSystem) -> Result<usize> {
    let tol = hypothesis_rank_tol(sys.tolerances(), spectral_norm(m));
    if m.is_empty() || spectral_norm(m) == 0.0 {
        return Ok(0);
    }
    Ok(numerical_rank(m, Some(tol))?.rank)
}

/// `E_j (I - Pi_j) Pi_i = 0` to `1e-9` (relative to `|E_j|`). Reported only;
/// none of the tests needs it.
pub fn impulse_free_condition(sys: &SwitchedSystem, i: usize, j: usize) -> Result<bool> {
    let n = sys.num_modes();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!("mode index out of range 0..{n}")));
    }
    let pi_i = &sys.mode(i).analysis().projector;
    let pi_j = &sys.mode(j).analysis().projector;
    let e_j = sys.mode(j).e();
    let residual = e_j * (identity(sys.dim()) - pi_j) * pi_i;
    Ok(spectral_norm(&residual) <= 1e-9 * spectral_norm(e_j).max(1.0))
}

/// `M' P_to M - P_from <= 0` on the jump domain of `from -> to`.
fn jump_decrease(sys: &SwitchedSystem, from: usize, to: usize, p_from: &Matrix, p_to: &Matrix) -> Result<Diagnostic> {
    let rule = sys.jump_rule(from, to)?;
    let domain = sys.jump_domain(from, to)?;
    let m = &rule.map;
    let form = symmetric_part(&(m.transpose() * p_to * m - p_from));
    let scale = spectral_norm(p_from).max(spectral_norm(m).powi(2) * spectral_norm(p_to));
    let (ok, margin) = pd_on_subspace(
        &form,
        &domain,
        Definiteness::Negative,
        false,
        Some(sys.tolerances().definiteness * scale),
    )?;
    Ok(Diagnostic::new(format!("jump {from}->{to}: M'P M - P <= 0"), ok)
        .margin(margin)
        .detail(format!("on a {}-dimensional jump domain", domain.dim())))
}

/// Whether the jump keeps the state inside the target consistency space.
fn jump_lands_consistent(sys: &SwitchedSystem, from: usize, to: usize) -> Result<Diagnostic> {
    let rule = sys.jump_rule(from, to)?;
    let domain = sys.jump_domain(from, to)?;
    let image = &rule.map * domain.basis();
    let target = sys.mode(to).consistency();
    let off = if image.ncols() == 0 {
        0.0
    } else {
        spectral_norm(&(&image - target.projector() * &image))
    };
    let scale = spectral_norm(&rule.map).max(1.0);
    Ok(
        Diagnostic::new(format!("jump {from}->{to}: lands in C_{to}"), off <= 1e-8 * scale)
            .margin(off)
            .informational(),
    )
}

/// Per-mode Lyapunov matrices plus a non-increasing jump condition on every
/// allowed transition.
pub fn check_theorem1(sys: &SwitchedSystem, ps: &[Matrix]) -> Result<StabilityVerdict> {
    if ps.len() != sys.num_modes() {
        return Err(Error::DimensionMismatch(format!(
            "{} Lyapunov matrices given for {} modes",
            ps.len(),
            sys.num_modes()
        )));
    }
    let mut diags = Vec::new();
    let mut certs = Vec::new();
    let mut alpha = f64::INFINITY;
    for (k, (mode, p)) in sys.modes().iter().zip(ps).enumerate() {
        let (_, decay) = verify_lyapunov_matrix(mode, p)?;
        diags.push(
            Diagnostic::new(format!("mode {k}: P > 0 on C"), decay.p_margin.passed()).margin(decay.p_margin.slack),
        );
        diags.push(
            Diagnostic::new(format!("mode {k}: PF + F'P < 0 on C"), decay.q_margin.passed())
                .margin(decay.q_margin.slack)
                .detail(format!("alpha = {:.6e}", decay.alpha)),
        );
        alpha = alpha.min(decay.alpha);
        let (k1, k2) = finsler_certificate(mode, p)
            .map(|c| (c.kappa1, c.kappa2))
            .unwrap_or((f64::INFINITY, f64::INFINITY));
        certs.push(LyapunovCertificate {
            p: p.clone(),
            kappa1: k1,
            kappa2: k2,
            margins: vec![decay.p_margin.clone(), decay.q_margin.clone()],
            method: CertificateMethod::VerifiedGiven,
            definiteness_tol: mode.tolerances().definiteness,
            iterations: None,
        });
    }
    let transitions: Vec<_> = sys.allowed().collect();
    for (i, j) in transitions {
        diags.push(jump_decrease(sys, i, j, &ps[i], &ps[j])?);
        diags.push(jump_lands_consistent(sys, i, j)?);
    }
    let mut verdict = StabilityVerdict::decide(TheoremTag::Theorem1, diags, VerdictStatus::HypothesisViolated);
    verdict.certificates = certs;
    if verdict.certified() {
        verdict.alpha = Some(alpha);
    }
    Ok(verdict)
}

/// Rank-condition test with the default split: index-0 modes strict, the
/// others non-strict.
pub fn check_rank_condition(sys: &SwitchedSystem) -> Result<StabilityVerdict> {
    let (strict, nonstrict): (Vec<usize>, Vec<usize>) = (0..sys.num_modes()).partition(|&k| sys.mode(k).index() == 0);
    check_rank_condition_test(sys, &strict, &nonstrict)
}

/// Common `P` that is strict on `strict` and non-strict on `nonstrict`,
/// where every non-strict mode `j` has a strict partner `i` with
/// `rank(F_i - F_j) = rank F_i - rank F_j`.
pub fn check_rank_condition_test(
    sys: &SwitchedSystem,
    strict: &[usize],
    nonstrict: &[usize],
) -> Result<StabilityVerdict> {
    let n_modes = sys.num_modes();
    let mut seen = vec![false; n_modes];
    for &k in strict.iter().chain(nonstrict) {
        if k >= n_modes || seen[k] {
            return Err(Error::InvalidArgument(format!(
                "mode {k} is out of range or listed twice"
            )));
        }
        seen[k] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidArgument("every mode must be strict or non-strict".into()));
    }

    let f = |k: usize| sys.mode(k).a_inv_e().clone();
    let mut diags = Vec::new();
    let mut rank_ok = true;
    for &j in nonstrict {
        let fj = f(j);
        let rj = rank_rel(&fj, sys)? as isize;
        let mut partner = None;
        let mut tried = Vec::new();
        for &i in strict {
            let fi = f(i);
            let lhs = rank_rel(&(&fi - &fj), sys)? as isize;
            let rhs = rank_rel(&fi, sys)? as isize - rj;
            tried.push(format!("({j},{i}): {lhs} vs {rhs}"));
            if lhs == rhs {
                partner = Some(i);
                break;
            }
        }
        let d = match partner {
            Some(i) => Diagnostic::new(format!("rank identity for mode {j}"), true).detail(format!("partner mode {i}")),
            None => {
                rank_ok = false;
                Diagnostic::new(format!("rank identity for mode {j}"), false).detail(if tried.is_empty() {
                    "no strict modes".into()
                } else {
                    tried.join(", ")
                })
            }
        };
        diags.push(d);
    }

    let strict_f: Vec<Matrix> = strict.iter().map(|&k| f(k)).collect();
    let nonstrict_f: Vec<Matrix> = nonstrict.iter().map(|&k| f(k)).collect();
    let mut certs = Vec::new();
    if rank_ok {
        match search_common_p(&strict_f, &nonstrict_f, &SearchOptions::default()) {
            Ok(cert) => {
                let worst = cert.margins.iter().map(|m| m.slack).fold(f64::INFINITY, f64::min);
                diags.push(
                    Diagnostic::new("common P found", true)
                        .margin(worst)
                        .detail(format!("{} iterations", cert.iterations.unwrap_or(0))),
                );
                let p = cert.p.clone();
                for (k, mode) in sys.modes().iter().enumerate() {
                    let (ok, decay) = verify_lyapunov_matrix(mode, &p)?;
                    diags.push(
                        Diagnostic::new(format!("mode {k}: P is a Lyapunov matrix on C"), ok)
                            .margin(decay.p_margin.slack.min(decay.q_margin.slack)),
                    );
                }
                let transitions: Vec<_> = sys.allowed().collect();
                for (i, j) in transitions {
                    diags.push(jump_decrease(sys, i, j, &p, &p)?);
                }
                certs.push(cert);
            }
            Err(Error::CertificateNotFound { iterations }) => diags.push(
                Diagnostic::new("common P found", false)
                    .detail(format!("search stopped after {iterations} iterations (inconclusive)")),
            ),
            Err(e) => return Err(e),
        }
    }
    let mut verdict = StabilityVerdict::decide(TheoremTag::RankCondition, diags, VerdictStatus::NoCertificate);
    verdict.certificates = certs;
    Ok(verdict)
}

/// Dominant singular triple of a matrix: `(sigma_1 u_1, v_1, rank)`.
pub(crate) fn rank_one_factors(d: &Matrix, sys: &SwitchedSystem) -> Result<(Vector, Vector, usize)> {
    let r = rank_rel(d, sys)?;
    let (u, sigma, v) = svd(d)?;
    let s = sigma.first().copied().unwrap_or(0.0);
    let u = u.column(0) * s;
    let v = v.column(0).into_owned();
    Ok((u, v, r))
}

/// Two-mode spectral test for an index-0 / index-1 pair with a continuous
/// state: stable pencils, rank-one difference `F_0 - F_1 = g h'` with
/// `(F_0, g)` controllable and `(F_0, h)` observable, and a product `F_0 F_1`
/// with exactly one zero and no negative real eigenvalue. Mode order does
/// not matter; modes are sorted by index.
pub fn spectral_test_index01(sys: &SwitchedSystem) -> Result<StabilityVerdict> {
    if sys.num_modes() != 2 {
        return Err(Error::MethodMismatch(format!(
            "the spectral test needs exactly 2 modes, got {}",
            sys.num_modes()
        )));
    }
    let tol = *sys.tolerances();
    let mut diags = Vec::new();

    // continuity: M = I on every jump domain
    let transitions: Vec<_> = sys.allowed().collect();
    for (i, j) in transitions {
        let rule = sys.jump_rule(i, j)?;
        let domain = sys.jump_domain(i, j)?;
        let gap = if domain.is_trivial() {
            0.0
        } else {
            spectral_norm(&((&rule.map - identity(sys.dim())) * domain.basis()))
        };
        diags.push(
            Diagnostic::new(
                format!("continuity {i}->{j}"),
                gap <= 1e-9 * spectral_norm(&rule.map).max(1.0),
            )
            .margin(gap),
        );
    }

    let (lo, hi) = if sys.mode(0).index() <= sys.mode(1).index() {
        (0, 1)
    } else {
        (1, 0)
    };
    let stable = sys.mode(lo).pencil_stable() && sys.mode(hi).pencil_stable();
    diags.push(Diagnostic::new("(a) both pencils stable", stable));
    let (i_lo, i_hi) = (sys.mode(lo).index(), sys.mode(hi).index());
    diags.push(
        Diagnostic::new("(b) indices are 0 and 1", i_lo == 0 && i_hi == 1).detail(format!("indices ({i_lo}, {i_hi})")),
    );

    let f_lo = sys.mode(lo).a_inv_e();
    let f_hi = sys.mode(hi).a_inv_e();
    let (g, h, r) = rank_one_factors(&(f_lo - f_hi), sys)?;
    diags.push(Diagnostic::new("(c) rank-one difference", r == 1).detail(format!("rank(F_lo - F_hi) = {r}")));
    if r == 1 {
        diags.push(Diagnostic::new(
            "(c) (F_lo, g) controllable",
            controllable(f_lo, &g, tol.rank)?,
        ));
        diags.push(Diagnostic::new(
            "(c) (F_lo, h) observable",
            observable(f_lo, &h, tol.rank)?,
        ));
    }

    let product = f_lo * f_hi;
    let eig = eigenvalues(&product)?;
    let scale = spectral_norm(&product).max(f64::MIN_POSITIVE);
    let zero_tol = tol.zero_eig * scale;
    let zeros = eig.iter().filter(|l| l.norm() < zero_tol).count();
    let ambiguous = eig
        .iter()
        .filter(|l| l.norm() >= zero_tol && l.norm() < 1e3 * zero_tol)
        .count();
    let negative_real = eig
        .iter()
        .filter(|l| l.norm() >= zero_tol && l.re < 0.0 && l.im.abs() <= tol.imag * scale)
        .count();
    let smallest = eig.iter().map(|l| l.norm()).fold(f64::INFINITY, f64::min);
    diags.push(
        Diagnostic::new("(d) exactly one zero eigenvalue", zeros == 1 && ambiguous == 0)
            .margin(smallest)
            .detail(format!(
                "{zeros} below {zero_tol:.1e}, {ambiguous} in the ambiguous band"
            )),
    );
    diags.push(Diagnostic::new("(d) no negative real eigenvalue", negative_real == 0));

    // the search is a witness for a certified verdict; when a hypothesis
    // already failed it is skipped
    let mut certs = Vec::new();
    let search = if diags.iter().all(|d| d.passed) {
        Some(search_common_p(
            std::slice::from_ref(f_lo),
            std::slice::from_ref(f_hi),
            &SearchOptions::default(),
        ))
    } else {
        None
    };
    match search.unwrap_or(Err(Error::CertificateNotFound { iterations: 0 })) {
        Ok(cert) => {
            diags.push(Diagnostic::new("common P search", true).informational());
            certs.push(cert);
        }
        Err(Error::CertificateNotFound { iterations: 0 }) => diags.push(
            Diagnostic::new("common P search", false)
                .detail("skipped: a hypothesis failed")
                .informational(),
        ),
        Err(Error::CertificateNotFound { iterations }) => diags.push(
            Diagnostic::new("common P search", false)
                .detail(format!("not found in {iterations} iterations"))
                .informational(),
        ),
        Err(e) => return Err(e),
    }

    let mut verdict = StabilityVerdict::decide(TheoremTag::Spectral01, diags, VerdictStatus::HypothesisViolated);
    verdict.certificates = certs;
    let mut eig_sorted: Vec<[f64; 2]> = eig.iter().map(|l| [l.re, l.im]).collect();
    eig_sorted.sort_by(|a, b| a[0].hypot(a[1]).total_cmp(&b[0].hypot(b[1])));
    verdict.product_eigenvalues = eig_sorted;
    Ok(verdict)
}
