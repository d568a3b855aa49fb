//! Structural analysis of a single regular pair `(E, A)` with invertible `A`.
//!
//! With `F = A^{-1} E`, the image chain `Im F^k` and the kernel chain
//! `ker F^k` (the two Wong sequences for invertible `A`) stabilise at the
//! index `k*`. Their limits split the state space into the consistency space
//! `C = Im F^{k*}` and the nilpotent part `ker F^{k*}`, which gives the
//! consistency projector and the restricted dynamics without forming a
//! Jordan decomposition.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{
    self, ensure_finite, ensure_square, hcat, identity, image_basis, kernel_basis, spectral_norm, Matrix,
    SubspaceBasis, Tolerances,
};

#[derive(Debug, Clone)]
pub struct StructuralAnalysis {
    pub index: usize,
    pub consistency: SubspaceBasis,
    /// Spans `ker F^{k*}`, the complement along which `projector` projects.
    pub nilpotent_space: SubspaceBasis,
    pub projector: Matrix,
    /// Inverse of `F` on the consistency space, zero on the nilpotent part.
    pub restricted_a: Matrix,
    /// Orthonormal rows spanning the orthogonal complement of `consistency`.
    pub constraint: Matrix,
    pub regular: bool,
    pub stable: bool,
    /// Finite generalized eigenvalues of the pencil.
    pub finite_eigenvalues: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct QuasiWeierstrassForm {
    pub s: Matrix,
    pub t: Matrix,
    pub j: Matrix,
    pub n: Matrix,
}

/// One descriptor mode `E x' = A x`.
#[derive(Debug, Clone)]
pub struct DescriptorPair {
    e: Matrix,
    a: Matrix,
    a_inv_e: Matrix,
    tol: Tolerances,
    analysis: StructuralAnalysis,
}

impl DescriptorPair {
    pub fn new(e: Matrix, a: Matrix) -> Result<Self> {
        Self::with_tolerances(e, a, Tolerances::default())
    }

    pub fn with_tolerances(e: Matrix, a: Matrix, tol: Tolerances) -> Result<Self> {
        ensure_square(&e, "E")?;
        ensure_square(&a, "A")?;
        ensure_finite(&e, "E")?;
        ensure_finite(&a, "A")?;
        let n = e.nrows();
        if a.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "E is {n}x{n} but A is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidMatrix("empty pair".into()));
        }
        let rank_a = matkit::rank(&a, tol.rank)?;
        if rank_a < n {
            return Err(Error::SingularA { rank: rank_a, n });
        }
        let a_inv_e = matkit::solve(&a, &e)?;
        let analysis = analyze_parts(&e, &a, &a_inv_e, &tol)?;
        Ok(Self {
            e,
            a,
            a_inv_e,
            tol,
            analysis,
        })
    }

    pub fn e(&self) -> &Matrix {
        &self.e
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    /// `A^{-1} E`.
    pub fn a_inv_e(&self) -> &Matrix {
        &self.a_inv_e
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn analysis(&self) -> &StructuralAnalysis {
        &self.analysis
    }

    pub fn index(&self) -> usize {
        self.analysis.index
    }

    pub fn consistency(&self) -> &SubspaceBasis {
        &self.analysis.consistency
    }

    pub fn is_regular(&self) -> bool {
        is_regular(&self.e, &self.a)
    }

    pub fn pencil_stable(&self) -> bool {
        self.analysis.stable
    }

    /// Re-runs the analysis under different tolerances.
    pub fn analyze_with(&self, tol: &Tolerances) -> Result<StructuralAnalysis> {
        analyze_parts(&self.e, &self.a, &self.a_inv_e, tol)
    }

    pub fn quasi_weierstrass(&self) -> Result<QuasiWeierstrassForm> {
        let an = &self.analysis;
        if an.consistency.is_trivial() {
            return Err(Error::TrivialConsistency);
        }
        let v = an.consistency.basis();
        let w = an.nilpotent_space.basis();
        let t = hcat(&[v, w]);
        let p = v.ncols();
        let restricted = v.transpose() * &self.a_inv_e * v;
        let j = restricted
            .clone()
            .try_inverse()
            .ok_or(Error::Internal("restriction of A^-1 E is singular".into()))?;
        let n_block = w.transpose() * &self.a_inv_e * w;
        let at_inv = (&self.a * &t)
            .try_inverse()
            .ok_or(Error::Internal("Wong bases do not span the state space".into()))?;
        let mut left = identity(t.ncols());
        left.view_mut((0, 0), (p, p)).copy_from(&j);
        let s = left * at_inv;
        Ok(QuasiWeierstrassForm { s, t, j, n: n_block })
    }
}

/// `det(sE - A)` is not identically zero: some of `n + 1` fixed sample
/// points gives a determinant above roundoff (Hadamard-scaled).
pub fn is_regular(e: &Matrix, a: &Matrix) -> bool {
    let n = e.nrows();
    (0..=n).any(|k| {
        let s = 0.37 + 1.13 * k as f64 - 0.5 * (k % 2) as f64 * k as f64;
        let m = e * s - a;
        let hadamard: f64 = m.column_iter().map(|c| c.norm()).product();
        if hadamard == 0.0 {
            return false;
        }
        let det = m.lu().determinant();
        det.abs() > 10.0 * n as f64 * f64::EPSILON * hadamard
    })
}

fn analyze_parts(e: &Matrix, a: &Matrix, f: &Matrix, tol: &Tolerances) -> Result<StructuralAnalysis> {
    let n = f.nrows();
    let regular = is_regular(e, a);
    if !regular {
        return Err(Error::NotRegular);
    }
    let f_norm = spectral_norm(f);
    let rank_tol = matkit::hypothesis_rank_tol(tol, f_norm);

    // Image chain V_{k+1} = F V_k from V_0 = R^n.
    let mut image = SubspaceBasis::full(n);
    let mut index = None;
    for k in 0..=n {
        let next = image_basis(&(f * image.basis()), Some(rank_tol))?;
        if next.dim() == image.dim() && next.same_as(&image, tol.subspace_angle) {
            index = Some(k);
            break;
        }
        image = next;
    }
    let index = index.ok_or_else(|| Error::Internal("image chain did not stabilise".into()))?;
    let consistency = image;

    // Kernel chain W_{k+1} = F^{-1}(W_k) from W_0 = {0}.
    let mut kernel = SubspaceBasis::trivial(n);
    for _ in 0..index {
        let residual = if kernel.is_trivial() {
            f.clone()
        } else {
            kernel.complement().basis().transpose() * f
        };
        kernel = if residual.nrows() == 0 {
            SubspaceBasis::full(n)
        } else {
            kernel_basis(&residual, Some(rank_tol))?
        };
    }
    if consistency.dim() + kernel.dim() != n {
        return Err(Error::Internal(format!(
            "Wong limits have dimensions {} + {} != {n}",
            consistency.dim(),
            kernel.dim()
        )));
    }

    let p = consistency.dim();
    let constraint = consistency.complement().basis().transpose();
    let (projector, restricted_a, finite_eigenvalues) = if p == 0 {
        (Matrix::zeros(n, n), Matrix::zeros(n, n), Vec::new())
    } else {
        let v = consistency.basis();
        let t = hcat(&[v, kernel.basis()]);
        let t_inv = t
            .try_inverse()
            .ok_or_else(|| Error::Internal("Wong bases are not complementary".into()))?;
        let top = t_inv.rows(0, p).into_owned();
        let restricted = v.transpose() * f * v;
        let j = restricted
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Internal("A^-1 E is not invertible on C".into()))?;
        let mu = matkit::eigenvalues(&restricted)?;
        let lambdas: Vec<Complex64> = mu.iter().map(|m| m.inv()).collect();
        (v * &top, v * j * &top, lambdas)
    };

    let lambda_scale = finite_eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let stable = finite_eigenvalues.iter().all(|l| l.re < -tol.stability * lambda_scale);

    Ok(StructuralAnalysis {
        index,
        consistency,
        nilpotent_space: kernel,
        projector,
        restricted_a,
        constraint,
        regular,
        stable,
        finite_eigenvalues,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModeSummary {
    pub regular: bool,
    pub index: usize,
    pub consistency_dim: usize,
    pub dim: usize,
    pub rank_e: usize,
    pub stable: bool,
}

impl DescriptorPair {
    pub fn summary(&self) -> ModeSummary {
        ModeSummary {
            regular: self.analysis.regular,
            index: self.analysis.index,
            consistency_dim: self.analysis.consistency.dim(),
            dim: self.dim(),
            rank_e: matkit::rank(&self.e, self.tol.rank).unwrap_or(0),
            stable: self.analysis.stable,
        }
    }
}
