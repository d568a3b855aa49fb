//! Quadratic Lyapunov certificates for descriptor pairs.
//!
//! For a pair with `F = A^{-1} E`, `V(x) = x^T P x` is a Lyapunov function iff
//! `P` is positive definite on the consistency space `C` and
//! `P F + F^T P` is negative definite on `C`. The subspace conditions can be
//! traded for full-space LMIs through Finsler multipliers on `C^T C`, where
//! `ker C = C`.

mod search;

pub use search::{search_common_p, verify_common_p, SearchOptions};

use serde::{Deserialize, Serialize};

use crate::descriptor::DescriptorPair;
use crate::error::{Error, Result};
use crate::matkit::{
    ensure_finite, ensure_square, ensure_symmetric, hypothesis_rank_tol, kernel_basis, numerical_rank, pd_on_subspace,
    spectral_norm, symmetric_eigenvalues, Definiteness, Matrix, Tolerances,
};
use crate::serde_ext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    VerifiedGiven,
    Searched,
}

/// One checked inequality. `value` is oriented so that larger is better
/// (`lambda_min` for "> 0", `-lambda_max` for "< 0"); the condition holds when
/// `value > required` (strict) or `value >= required` (non-strict).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub label: String,
    #[serde(with = "serde_ext::ext_f64")]
    pub value: f64,
    #[serde(with = "serde_ext::ext_f64")]
    pub required: f64,
    pub strict: bool,
    #[serde(with = "serde_ext::ext_f64")]
    pub slack: f64,
}

impl Margin {
    pub fn new(label: impl Into<String>, value: f64, required: f64, strict: bool) -> Self {
        Self {
            label: label.into(),
            value,
            required,
            strict,
            slack: value - required,
        }
    }

    pub fn passed(&self) -> bool {
        if self.strict {
            self.slack > 0.0
        } else {
            self.slack >= 0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertificate {
    #[serde(with = "serde_ext::matrix")]
    pub p: Matrix,
    #[serde(with = "serde_ext::ext_f64")]
    pub kappa1: f64,
    #[serde(with = "serde_ext::ext_f64")]
    pub kappa2: f64,
    pub margins: Vec<Margin>,
    pub method: CertificateMethod,
    pub definiteness_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

impl LyapunovCertificate {
    pub fn all_margins_pass(&self) -> bool {
        self.margins.iter().all(Margin::passed)
    }
}

/// Decay data of `v = x^T P x` along one mode: `v' <= -2 alpha v` on `C`,
/// `lambda1 |x|^2 <= v <= lambda2 |x|^2` on `C`, `beta = sqrt(lambda2 / lambda1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticDecay {
    #[serde(with = "serde_ext::matrix")]
    pub q: Matrix,
    #[serde(with = "serde_ext::ext_f64")]
    pub alpha: f64,
    #[serde(with = "serde_ext::ext_f64")]
    pub lambda1: f64,
    #[serde(with = "serde_ext::ext_f64")]
    pub lambda2: f64,
    #[serde(with = "serde_ext::ext_f64")]
    pub beta: f64,
    pub p_margin: Margin,
    pub q_margin: Margin,
}

fn check_candidate(pair: &DescriptorPair, p: &Matrix) -> Result<()> {
    ensure_square(p, "P")?;
    ensure_finite(p, "P")?;
    if p.nrows() != pair.dim() {
        return Err(Error::DimensionMismatch(format!(
            "P is {}x{}, pair has dimension {}",
            p.nrows(),
            p.ncols(),
            pair.dim()
        )));
    }
    ensure_symmetric(p, pair.tolerances().symmetry)
}

/// `P F + F^T P`.
pub fn lyapunov_form(p: &Matrix, f: &Matrix) -> Matrix {
    let pf = p * f;
    &pf + pf.transpose()
}

fn scales(pair: &DescriptorPair, p: &Matrix) -> (f64, f64) {
    let tol = pair.tolerances().definiteness;
    let pn = spectral_norm(p);
    (tol * pn, tol * pn * spectral_norm(pair.a_inv_e()))
}

/// Checks that `P` is a Lyapunov matrix for the pair and computes the decay
/// constants. A trivial consistency space passes vacuously with infinite
/// `alpha`.
pub fn verify_lyapunov_matrix(pair: &DescriptorPair, p: &Matrix) -> Result<(bool, QuadraticDecay)> {
    check_candidate(pair, p)?;
    let f = pair.a_inv_e();
    let an = pair.analysis();
    let basis = &an.consistency;
    let (tol_p, tol_q) = scales(pair, p);
    let q = -lyapunov_form(p, f);

    let (ok_p, m_p) = pd_on_subspace(p, basis, Definiteness::Positive, true, Some(tol_p))?;
    let (ok_q, m_q) = pd_on_subspace(&q, basis, Definiteness::Positive, true, Some(tol_q))?;
    let p_margin = Margin::new("P > 0 on C", m_p, tol_p, true);
    let q_margin = Margin::new("PF + F'P < 0 on C", m_q, tol_q, true);

    if basis.is_trivial() {
        return Ok((
            true,
            QuadraticDecay {
                q,
                alpha: f64::INFINITY,
                lambda1: 1.0,
                lambda2: 1.0,
                beta: 1.0,
                p_margin,
                q_margin,
            },
        ));
    }

    let b = basis.basis();
    let p_r = b.transpose() * p * b;
    let eig_p = symmetric_eigenvalues(&p_r)?;
    let lambda1 = eig_p[0];
    let lambda2 = eig_p[eig_p.len() - 1];
    let (alpha, beta) = if ok_p {
        let a_t = &an.restricted_a;
        let q_tilde = a_t.transpose() * &q * a_t;
        let q_r = b.transpose() * q_tilde * b;
        let chol = nalgebra::Cholesky::new(crate::matkit::symmetric_part(&p_r))
            .ok_or_else(|| Error::Internal("P restricted to C lost definiteness".into()))?;
        let l_inv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Internal("singular Cholesky factor".into()))?;
        let m = &l_inv * q_r * l_inv.transpose();
        let eig = symmetric_eigenvalues(&m)?;
        (0.5 * eig[0], (lambda2 / lambda1).sqrt())
    } else {
        (0.0, f64::INFINITY)
    };

    Ok((
        ok_p && ok_q,
        QuadraticDecay {
            q,
            alpha,
            lambda1,
            lambda2,
            beta,
            p_margin,
            q_margin,
        },
    ))
}

const KAPPA_MAX: f64 = 1e12;
const KAPPA_MIN_STEP: f64 = 1e-12;

/// Smallest multiplier (up to bisection accuracy) in `[0, 1e12]` for a
/// property that is monotone in the multiplier.
fn least_multiplier(holds: impl Fn(f64) -> Result<bool>) -> Result<Option<f64>> {
    if holds(0.0)? {
        return Ok(Some(0.0));
    }
    let mut lo = 0.0;
    let mut hi = KAPPA_MIN_STEP;
    while hi <= KAPPA_MAX {
        if holds(hi)? {
            for _ in 0..60 {
                let mid = if lo == 0.0 { hi / 10.0 } else { (lo * hi).sqrt() };
                if holds(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if lo > 0.0 && hi / lo < 1.0 + 1e-6 {
                    break;
                }
            }
            return Ok(Some(hi));
        }
        lo = hi;
        hi *= 10.0;
    }
    Ok(None)
}

/// Finsler multipliers `kappa1, kappa2 >= 0` with `P + kappa1 C^T C > 0` and
/// `P F + F^T P - kappa2 C^T C < 0`.
pub fn finsler_certificate(pair: &DescriptorPair, p: &Matrix) -> Result<LyapunovCertificate> {
    check_candidate(pair, p)?;
    let f = pair.a_inv_e();
    let c = &pair.analysis().constraint;
    let ctc = c.transpose() * c;
    let (tol_p, tol_q) = scales(pair, p);
    let form = lyapunov_form(p, f);

    let lmi0 = |k: f64| -> Result<f64> { Ok(symmetric_eigenvalues(&(p + &ctc * k))?[0]) };
    let lmi1 = |k: f64| -> Result<f64> {
        let eig = symmetric_eigenvalues(&(&form - &ctc * k))?;
        Ok(-eig[eig.len() - 1])
    };

    let k1 = least_multiplier(|k| Ok(lmi0(k)? > tol_p))?.ok_or(Error::Infeasible)?;
    let k2 = least_multiplier(|k| Ok(lmi1(k)? > tol_q))?.ok_or(Error::Infeasible)?;
    let margins = vec![
        Margin::new("P + k1 C'C > 0", lmi0(k1)?, tol_p, true),
        Margin::new("PF + F'P - k2 C'C < 0", lmi1(k2)?, tol_q, true),
    ];
    Ok(LyapunovCertificate {
        p: p.clone(),
        kappa1: k1,
        kappa2: k2,
        margins,
        method: CertificateMethod::VerifiedGiven,
        definiteness_tol: pair.tolerances().definiteness,
        iterations: None,
    })
}

/// Whether some positive multiple `cP` satisfies the unit-multiplier form
/// `cP + C^T C > 0`, `c(PF + F^T P) - C^T C < 0`; `c` ranges over powers of
/// ten in `[1e-18, 1e12]`.
pub fn normalized_certificate_exists(pair: &DescriptorPair, p: &Matrix) -> Result<bool> {
    check_candidate(pair, p)?;
    let f = pair.a_inv_e();
    let c = &pair.analysis().constraint;
    let ctc = c.transpose() * c;
    let (tol_p, tol_q) = scales(pair, p);
    let form = lyapunov_form(p, f);
    for e in (-18..=12).rev() {
        let s = 10f64.powi(e);
        let m0 = symmetric_eigenvalues(&(p * s + &ctc))?[0];
        if m0 <= s * tol_p {
            continue;
        }
        let eig = symmetric_eigenvalues(&(&form * s - &ctc))?;
        if -eig[eig.len() - 1] > s * tol_q {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Kernel equality `ker B = ker(B + B^T)` under the hypotheses
/// `rank(A - B) = rank A - rank B`, `A + A^T > 0`, `B + B^T >= 0`.
/// Violated hypotheses are reported as errors, never as a kernel verdict.
pub fn interlacing_kernel_check(a: &Matrix, b: &Matrix, tol: &Tolerances) -> Result<bool> {
    ensure_square(a, "A")?;
    ensure_square(b, "B")?;
    ensure_finite(a, "A")?;
    ensure_finite(b, "B")?;
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch("A and B differ in size".into()));
    }
    let rank_of =
        |m: &Matrix| -> Result<usize> { Ok(numerical_rank(m, Some(hypothesis_rank_tol(tol, spectral_norm(m))))?.rank) };
    let rank_a = rank_of(a)?;
    let rank_b = rank_of(b)?;
    let rank_diff = rank_of(&(a - b))?;
    let expected = rank_a as isize - rank_b as isize;
    if rank_diff as isize != expected {
        return Err(Error::RankMismatch { rank_diff, expected });
    }
    let sa = a + a.transpose();
    let min_a = symmetric_eigenvalues(&sa)?[0];
    if min_a <= tol.definiteness * spectral_norm(&sa) {
        return Err(Error::NotPD { min_eig: min_a });
    }
    let sb = b + b.transpose();
    let min_b = symmetric_eigenvalues(&sb)?[0];
    let psd_slack = tol.definiteness * spectral_norm(&sb).max(spectral_norm(&sa));
    if min_b < -psd_slack {
        return Err(Error::NotPSD { min_eig: min_b });
    }
    let ker_b = kernel_basis(b, Some(hypothesis_rank_tol(tol, spectral_norm(b))))?;
    let ker_sb = kernel_basis(&sb, Some(hypothesis_rank_tol(tol, spectral_norm(&sb))))?;
    Ok(ker_b.same_as(&ker_sb, tol.subspace_angle.max(1e-7)))
}
