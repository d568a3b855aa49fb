//! Dense linear-algebra substrate.
//!
//! Every rank decision in the crate goes through [`numerical_rank`]. Generic
//! ranks count singular values above `max(rows, cols) * eps * sigma_max`;
//! structural hypotheses use the looser [`HYPOTHESIS_RANK_REL`] cutoff. An
//! absolute threshold, when supplied, overrides both.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const EIG_MAX_ITER: usize = 10_000;

/// Numeric thresholds shared by the analysis routines.
///
/// `rank` is an absolute singular-value cutoff; when `None` the relative
/// default policy is used. The remaining fields are relative to a norm named
/// at each use site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub rank: Option<f64>,
    pub subspace_angle: f64,
    pub zero_eig: f64,
    pub imag: f64,
    pub definiteness: f64,
    pub symmetry: f64,
    pub stability: f64,
    pub consistency: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: None,
            subspace_angle: 1e-8,
            zero_eig: 1e-8,
            imag: 1e-8,
            definiteness: 1e-9,
            symmetry: 1e-9,
            stability: 1e-9,
            consistency: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub tol_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    Positive,
    Negative,
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidMatrix(format!("{what} has non-finite entries")))
    }
}

pub fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn identity(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

fn to_faer(m: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full SVD of an arbitrary matrix: `(U (m x m), sigma (descending, length
/// min(m, n)), V (n x n))`.
///
/// faer's divide-and-conquer SVD is used here rather than nalgebra's: the
/// latter reconstructs some rank-deficient products only to ~1e-12
/// relative, which is too coarse for the rank decisions built on it.
pub fn svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok((identity(rows), Vec::new(), identity(cols)));
    }
    let svd = to_faer(m)
        .svd()
        .map_err(|_| Error::Internal("SVD did not converge".into()))?;
    let s = svd.S().column_vector();
    let sigma: Vec<f64> = (0..rows.min(cols)).map(|i| s[i]).collect();
    Ok((from_faer(svd.U()), sigma, from_faer(svd.V())))
}

/// Moore-Penrose inverse, dropping singular values at or below `cutoff`.
pub fn pseudo_inverse(m: &Matrix, cutoff: f64) -> Result<Matrix> {
    let (u, sigma, v) = svd(m)?;
    let mut out = Matrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in sigma.iter().enumerate() {
        if s > cutoff {
            out += v.column(k) * u.column(k).transpose() / s;
        }
    }
    Ok(out)
}

pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    to_faer(m)
        .singular_values()
        .map_err(|_| Error::Internal("SVD did not converge".into()))
}

/// Greedy Gram-Schmidt over candidate vectors (in order), then completion
/// with canonical vectors. Leading candidates that are already orthonormal
/// are kept exactly.
fn fill_orthonormal(out: &mut Matrix, candidates: &[Vector]) {
    let dim = out.nrows();
    let mut count = 0;
    let canon = (0..dim).map(|i| {
        let mut e = Vector::zeros(dim);
        e[i] = 1.0;
        e
    });
    for cand in candidates.iter().cloned().chain(canon) {
        if count == dim {
            break;
        }
        let mut v = cand;
        for _ in 0..2 {
            for j in 0..count {
                let c = out.column(j).dot(&v);
                v -= out.column(j) * c;
            }
        }
        let norm = v.norm();
        if norm > 0.5 {
            out.set_column(count, &(v / norm));
            count += 1;
        }
    }
}

pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m)
        .ok()
        .and_then(|s| s.first().copied())
        .unwrap_or_else(|| m.norm())
}

/// Relative cutoff for ranks that decide a structural hypothesis (Wong
/// chains, rank identities between modes). The plain `numerical_rank`
/// default sits within a small factor of the roundoff left in products like
/// `F^k` of a nilpotent part, so those decisions use a wider gap.
pub const HYPOTHESIS_RANK_REL: f64 = 1e-10;

/// `tol.rank` when set, else `HYPOTHESIS_RANK_REL * norm`.
pub fn hypothesis_rank_tol(tol: &Tolerances, norm: f64) -> f64 {
    tol.rank.unwrap_or(HYPOTHESIS_RANK_REL * norm.max(f64::MIN_POSITIVE))
}

fn default_rank_tol(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

pub fn numerical_rank(m: &Matrix, tol: Option<f64>) -> Result<RankReport> {
    if m.is_empty() {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    ensure_finite(m, "matrix")?;
    let sigma = singular_values(m)?;
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let tol_used = tol.unwrap_or_else(|| default_rank_tol(m.nrows(), m.ncols(), sigma_max));
    let rank = sigma.iter().filter(|&&s| s > tol_used).count();
    Ok(RankReport {
        rank,
        singular_values: sigma,
        tol_used,
    })
}

pub fn rank(m: &Matrix, tol: Option<f64>) -> Result<usize> {
    if m.is_empty() {
        return Ok(0);
    }
    numerical_rank(m, tol).map(|r| r.rank)
}

/// `M = X * Y^T` with `X` orthonormal (left singular vectors) and the
/// singular values folded into `Y`.
pub fn full_rank_decomposition(m: &Matrix, tol: Option<f64>) -> Result<(Matrix, Matrix)> {
    ensure_square(m, "matrix")?;
    let report = numerical_rank(m, tol)?;
    let r = report.rank;
    if r == 0 {
        return Err(Error::ZeroMatrix);
    }
    let (u, sigma, v) = svd(m)?;
    let x = u.columns(0, r).into_owned();
    let mut y = v.columns(0, r).into_owned();
    for (j, s) in sigma.iter().take(r).enumerate() {
        y.column_mut(j).scale_mut(*s);
    }
    Ok((x, y))
}

/// Orthonormal basis of a subspace of `R^ambient_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    ambient_dim: usize,
    basis: Matrix,
}

impl SubspaceBasis {
    pub fn full(n: usize) -> Self {
        Self {
            ambient_dim: n,
            basis: identity(n),
        }
    }

    pub fn trivial(n: usize) -> Self {
        Self {
            ambient_dim: n,
            basis: Matrix::zeros(n, 0),
        }
    }

    /// Orthonormal basis for the span of the given columns.
    pub fn span(columns: &Matrix, tol: Option<f64>) -> Result<Self> {
        image_basis(columns, tol)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_trivial(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    /// Orthogonal projector `B B^T`.
    pub fn projector(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }

    pub fn project(&self, x: &Vector) -> Vector {
        &self.basis * (self.basis.transpose() * x)
    }

    pub fn distance(&self, x: &Vector) -> f64 {
        (x - self.project(x)).norm()
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> Self {
        if self.is_trivial() {
            return Self::full(self.ambient_dim);
        }
        let mut out = Matrix::zeros(self.ambient_dim, self.ambient_dim);
        let cols: Vec<Vector> = self.basis.column_iter().map(|c| c.into_owned()).collect();
        fill_orthonormal(&mut out, &cols);
        Self {
            ambient_dim: self.ambient_dim,
            basis: out.columns(self.dim(), self.ambient_dim - self.dim()).into_owned(),
        }
    }

    pub fn intersect(&self, other: &Self, tol: Option<f64>) -> Result<Self> {
        if self.ambient_dim != other.ambient_dim {
            return Err(Error::DimensionMismatch("subspaces in different spaces".into()));
        }
        if self.is_trivial() || other.is_trivial() {
            return Ok(Self::trivial(self.ambient_dim));
        }
        // x = B a lies in `other` iff (I - O O^T) B a = 0.
        let residual = other.complement().basis.transpose() * &self.basis;
        if residual.nrows() == 0 {
            return Ok(self.clone());
        }
        let coeffs = kernel_basis(&residual, tol.or(Some(1e-10)))?;
        Ok(Self {
            ambient_dim: self.ambient_dim,
            basis: &self.basis * coeffs.basis,
        })
    }

    /// Largest principal angle sine between two subspaces of equal dimension;
    /// `None` when dimensions differ.
    pub fn max_angle_sine(&self, other: &Self) -> Option<f64> {
        if self.dim() != other.dim() || self.ambient_dim != other.ambient_dim {
            return None;
        }
        if self.is_trivial() {
            return Some(0.0);
        }
        let residual = &other.basis - self.projector() * &other.basis;
        Some(spectral_norm(&residual))
    }

    pub fn same_as(&self, other: &Self, angle_tol: f64) -> bool {
        self.max_angle_sine(other).is_some_and(|s| s <= angle_tol)
    }

    /// Preimage `{x : M x in self}`.
    pub fn preimage(&self, m: &Matrix, tol: Option<f64>) -> Result<Self> {
        if m.nrows() != self.ambient_dim {
            return Err(Error::DimensionMismatch("preimage map rows".into()));
        }
        let comp = self.complement();
        if comp.is_trivial() {
            return Ok(Self::full(m.ncols()));
        }
        kernel_basis(&(comp.basis.transpose() * m), tol)
    }
}

pub fn image_basis(m: &Matrix, tol: Option<f64>) -> Result<SubspaceBasis> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Ok(SubspaceBasis::trivial(m.nrows()));
    }
    let r = numerical_rank(m, tol)?.rank;
    let (u, _, _) = svd(m)?;
    Ok(SubspaceBasis {
        ambient_dim: m.nrows(),
        basis: u.columns(0, r).into_owned(),
    })
}

pub fn kernel_basis(m: &Matrix, tol: Option<f64>) -> Result<SubspaceBasis> {
    if m.nrows() == 0 {
        return Ok(SubspaceBasis::full(m.ncols()));
    }
    if m.ncols() == 0 {
        return Ok(SubspaceBasis::trivial(0));
    }
    let r = numerical_rank(m, tol)?.rank;
    let (_, _, v) = svd(m)?;
    let n = m.ncols();
    Ok(SubspaceBasis {
        ambient_dim: n,
        basis: v.columns(r, n - r).into_owned(),
    })
}

pub fn symmetric_part(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &Matrix) -> f64 {
    (m - m.transpose()).norm()
}

pub fn ensure_symmetric(m: &Matrix, rel_tol: f64) -> Result<()> {
    ensure_square(m, "matrix")?;
    let asym = asymmetry(m);
    if asym <= rel_tol * m.norm().max(1.0) {
        Ok(())
    } else {
        Err(Error::NotSymmetric { asymmetry: asym })
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let eig = SymmetricEigen::try_new(symmetric_part(m), f64::EPSILON, EIG_MAX_ITER).ok_or(Error::EigenFailure)?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Definiteness of `B^T Q B`.
///
/// The returned margin is signed so that a positive value always means the
/// requested sense holds: `lambda_min` for positive, `-lambda_max` for
/// negative. A zero-dimensional subspace passes vacuously with margin `+inf`.
/// `tol` is absolute and defaults to `1e-9 * ||Q||_2`; strict checks require
/// `margin > tol`, non-strict ones `margin >= -tol`.
pub fn pd_on_subspace(
    q: &Matrix,
    b: &SubspaceBasis,
    sense: Definiteness,
    strict: bool,
    tol: Option<f64>,
) -> Result<(bool, f64)> {
    ensure_finite(q, "Q")?;
    ensure_symmetric(q, Tolerances::default().symmetry)?;
    if b.ambient_dim() != q.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "subspace lives in R^{}, matrix is {}x{}",
            b.ambient_dim(),
            q.nrows(),
            q.ncols()
        )));
    }
    if b.is_trivial() {
        return Ok((true, f64::INFINITY));
    }
    let tol = tol.unwrap_or_else(|| 1e-9 * spectral_norm(q));
    let restricted = b.basis().transpose() * q * b.basis();
    let eig = symmetric_eigenvalues(&restricted)?;
    let margin = match sense {
        Definiteness::Positive => eig[0],
        Definiteness::Negative => -eig[eig.len() - 1],
    };
    let ok = if strict { margin > tol } else { margin >= -tol };
    Ok((ok, margin))
}

pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "matrix")?;
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, EIG_MAX_ITER).ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Kalman rank test on `[g, Ag, ..., A^{n-1} g]`. `A` and `g` are scaled to
/// unit norm first; the reachable subspace does not change.
pub fn controllable(a: &Matrix, g: &Vector, tol: Option<f64>) -> Result<bool> {
    ensure_square(a, "A")?;
    let n = a.nrows();
    if g.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "vector has length {}, matrix is {n}x{n}",
            g.len()
        )));
    }
    let gn = g.norm();
    if gn == 0.0 {
        return Ok(n == 0);
    }
    let an = spectral_norm(a);
    let a_hat = if an > 0.0 { a / an } else { a.clone() };
    let mut kalman = Matrix::zeros(n, n);
    let mut col = g / gn;
    for j in 0..n {
        kalman.set_column(j, &col);
        col = &a_hat * col;
    }
    Ok(rank(&kalman, tol)? == n)
}

pub fn observable(a: &Matrix, h: &Vector, tol: Option<f64>) -> Result<bool> {
    controllable(&a.transpose(), h, tol)
}

/// Solves `A X = B`, failing on a numerically singular `A`.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let lu = a.clone().lu();
    lu.solve(b).ok_or(Error::InvalidMatrix("singular system matrix".into()))
}

pub fn hcat(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidMatrix("ragged rows".into()));
    }
    let m = Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite(&m, "matrix")?;
    Ok(m)
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
