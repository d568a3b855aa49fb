//! Order reduction through full-rank decompositions `E_i = X_i Y_i'`.
//!
//! With `z = Y_i' x`, mode `i` becomes `Etilde_i z' = z`,
//! `Etilde_i = Y_i' A_i^{-1} X_i`, and its index drops by one. The state is
//! recovered by `x = T_i z` with `T_i = A_i^{-1} X_i Atilde_i`, where
//! `Atilde_i` is the restricted dynamics of the reduced pair: on the
//! consistency space `x = A^{-1} E x' = A^{-1} X z'` and `z' = Atilde z`.

use crate::descriptor::DescriptorPair;
use crate::error::{Error, Result};
use crate::matkit::{
    full_rank_decomposition, hypothesis_rank_tol, identity, image_basis, solve, spectral_norm, Matrix, SubspaceBasis,
};

use super::checks::spectral_test_index01;
use super::verdict::{Diagnostic, StabilityVerdict, TheoremTag, VerdictStatus};
use super::{JumpRule, Restriction, SwitchedSystem};

#[derive(Debug, Clone)]
pub struct ReductionData {
    pub x: Vec<Matrix>,
    pub y: Vec<Matrix>,
    pub e_tilde: Vec<Matrix>,
    /// Lift maps: `x = T_i z` on mode `i`.
    pub t: Vec<Matrix>,
    pub r: usize,
}

impl ReductionData {
    /// `z = Y_mode' x`.
    pub fn reduce_state(&self, mode: usize, x: &crate::matkit::Vector) -> crate::matkit::Vector {
        self.y[mode].transpose() * x
    }

    pub fn lift_state(&self, mode: usize, z: &crate::matkit::Vector) -> crate::matkit::Vector {
        &self.t[mode] * z
    }
}

fn decompositions(sys: &SwitchedSystem, decomps: Option<&[(Matrix, Matrix)]>) -> Result<Vec<(Matrix, Matrix)>> {
    let n = sys.dim();
    let out: Vec<(Matrix, Matrix)> = match decomps {
        Some(d) => {
            if d.len() != sys.num_modes() {
                return Err(Error::DecompositionMismatch(format!(
                    "{} decompositions for {} modes",
                    d.len(),
                    sys.num_modes()
                )));
            }
            d.to_vec()
        }
        None => default_decompositions(sys)?,
    };
    let ranks: Vec<usize> = out.iter().map(|(x, _)| x.ncols()).collect();
    for (k, (x, y)) in out.iter().enumerate() {
        if x.nrows() != n || y.nrows() != n || y.ncols() != x.ncols() {
            return Err(Error::DecompositionMismatch(format!(
                "mode {k}: X is {}x{}, Y is {}x{}, state dimension {n}",
                x.nrows(),
                x.ncols(),
                y.nrows(),
                y.ncols()
            )));
        }
        let e = sys.mode(k).e();
        let err = spectral_norm(&(x * y.transpose() - e));
        if err > 1e-9 * spectral_norm(e).max(1.0) {
            return Err(Error::DecompositionMismatch(format!(
                "mode {k}: X Y' differs from E by {err:.3e}"
            )));
        }
    }
    if ranks.iter().any(|&r| r != ranks[0]) {
        let full: Vec<usize> = (0..ranks.len()).filter(|&k| ranks[k] == n).collect();
        let listing = ranks
            .iter()
            .enumerate()
            .map(|(k, r)| format!("mode {k} (index {}): r = {r}", sys.mode(k).index()))
            .collect::<Vec<_>>()
            .join(", ");
        let hint = if full.is_empty() {
            String::new()
        } else {
            format!("; modes {full:?} already have invertible E, nothing to reduce there")
        };
        return Err(Error::DecompositionMismatch(format!(
            "column counts differ: {listing}{hint}"
        )));
    }
    Ok(out)
}

/// A shared orthonormal `Y` (with `X_i = E_i Y`) when all `E_i` have the
/// same row space, so that `z = Y' x` means the same thing in every mode;
/// otherwise per-mode SVD factors.
fn default_decompositions(sys: &SwitchedSystem) -> Result<Vec<(Matrix, Matrix)>> {
    let tol = sys.tolerances().rank;
    let first = sys.mode(0).e();
    let rows = image_basis(&first.transpose(), tol)?;
    let mut y = rows.basis().clone();
    if y.ncols() == sys.dim() {
        // standard modes: keep x as the reduced state, giving Etilde = A^-1 E
        y = identity(sys.dim());
    }
    if y.ncols() == 0 {
        return Err(Error::ZeroMatrix);
    }
    let shared = sys.modes().iter().all(|m| {
        let e = m.e();
        let off = spectral_norm(&(e - e * &y * y.transpose()));
        off <= 1e-10 * spectral_norm(e).max(1.0) && crate::matkit::rank(e, tol).is_ok_and(|r| r == y.ncols())
    });
    if shared {
        return Ok(sys.modes().iter().map(|m| (m.e() * &y, y.clone())).collect());
    }
    sys.modes()
        .iter()
        .map(|m| full_rank_decomposition(m.e(), tol))
        .collect()
}

/// Reduced system over `z` plus the data linking it to the original one.
/// Every allowed transition of the reduced system gets the explicit rule
/// `z+ = Y_j' M_ji T_i z-`, restricted to `T_i z- in S_ji`.
pub fn reduce_order(
    sys: &SwitchedSystem,
    decomps: Option<&[(Matrix, Matrix)]>,
) -> Result<(SwitchedSystem, ReductionData)> {
    let d = decompositions(sys, decomps)?;
    let r = d[0].0.ncols();
    let mut data = ReductionData {
        x: Vec::new(),
        y: Vec::new(),
        e_tilde: Vec::new(),
        t: Vec::new(),
        r,
    };
    let mut reduced_modes = Vec::new();
    for (k, (x, y)) in d.into_iter().enumerate() {
        let mode = sys.mode(k);
        let a_inv_x = solve(mode.a(), &x)?;
        let e_tilde = y.transpose() * &a_inv_x;
        // Etilde may be pure roundoff (a nilpotent mode of index two), so
        // its ranks are judged against the size of the factors
        let mut tol = *sys.tolerances();
        tol.rank = Some(hypothesis_rank_tol(&tol, spectral_norm(&y) * spectral_norm(&a_inv_x)));
        let pair = DescriptorPair::with_tolerances(e_tilde.clone(), identity(r), tol)?;
        let t = &a_inv_x * &pair.analysis().restricted_a;
        data.x.push(x);
        data.y.push(y);
        data.e_tilde.push(e_tilde);
        data.t.push(t);
        reduced_modes.push(pair);
    }
    let transitions: Vec<_> = sys.allowed().collect();
    let mut reduced = SwitchedSystem::new(reduced_modes)?
        .with_tolerances(*sys.tolerances())
        .with_allowed(transitions.iter().copied())?
        .with_continuous_default(false);
    for (i, j) in transitions {
        let rule = sys.jump_rule(i, j)?;
        let map = data.y[j].transpose() * &rule.map * &data.t[i];
        let restriction = match rule.restriction {
            None => None,
            Some(Restriction::Hyperplane(c)) => {
                let pulled = data.t[i].transpose() * c;
                (pulled.norm() > 1e-12 * spectral_norm(&data.t[i])).then_some(Restriction::Hyperplane(pulled))
            }
            Some(Restriction::Subspace(s)) => {
                let pre = s.preimage(&data.t[i], None)?;
                (pre.dim() < r).then_some(Restriction::Subspace(pre))
            }
        };
        reduced.set_jump(i, j, JumpRule::new(map, restriction))?;
    }
    Ok((reduced, data))
}

/// `Y_j' C_j`: reduced states from which mode `j` can be entered.
pub fn admissible_entry_space(
    sys: &SwitchedSystem,
    j: usize,
    decomp: Option<(&Matrix, &Matrix)>,
) -> Result<SubspaceBasis> {
    if j >= sys.num_modes() {
        return Err(Error::InvalidArgument(format!("mode {j} out of range")));
    }
    let y = match decomp {
        Some((_, y)) => y.clone(),
        None => full_rank_decomposition(sys.mode(j).e(), sys.tolerances().rank)?.1,
    };
    let c = sys.mode(j).consistency();
    image_basis(
        &(y.transpose() * c.basis()),
        Some(1e-10 * spectral_norm(&y).max(f64::MIN_POSITIVE)),
    )
}

/// Index-1 / index-2 spectral test: checks the original pair, then reduces
/// and runs the index-0 / index-1 test on the reduced system.
pub fn spectral_test_index12(sys: &SwitchedSystem, decomps: Option<&[(Matrix, Matrix)]>) -> Result<StabilityVerdict> {
    if sys.num_modes() != 2 {
        return Err(Error::MethodMismatch(format!(
            "the spectral test needs exactly 2 modes, got {}",
            sys.num_modes()
        )));
    }
    let mut idx = sys.indices();
    idx.sort_unstable();
    let mut diags = vec![
        Diagnostic::new(
            "(a) both pencils stable",
            sys.mode(0).pencil_stable() && sys.mode(1).pencil_stable(),
        ),
        Diagnostic::new("(b) indices are 1 and 2", idx == [1, 2]).detail(format!("indices ({}, {})", idx[0], idx[1])),
    ];
    if diags.iter().any(|d| !d.passed) {
        return Ok(StabilityVerdict::decide(
            TheoremTag::Spectral12,
            diags,
            VerdictStatus::HypothesisViolated,
        ));
    }
    let (reduced, _) = reduce_order(sys, decomps)?;
    let inner = spectral_test_index01(&reduced)?;
    for mut d in inner.diagnostics {
        d.name = format!("reduced: {}", d.name);
        diags.push(d);
    }
    let mut verdict = StabilityVerdict::decide(TheoremTag::Spectral12, diags, inner.status);
    verdict.certificates = inner.certificates;
    verdict.product_eigenvalues = inner.product_eigenvalues;
    Ok(verdict)
}
