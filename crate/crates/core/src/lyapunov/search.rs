//! Common Lyapunov matrix search by alternating projections.
//!
//! The unknown is a symmetric `P`, parametrised by an orthonormal basis of
//! symmetric matrices. Each LMI block is a linear image of the coordinate
//! vector; the search alternates between the shifted PSD cones and the range
//! of the block map. Margins are unit size (homogeneity makes that WLOG) and
//! the modes are normalised by their spectral norm first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{lyapunov_form, CertificateMethod, LyapunovCertificate, Margin};
use crate::error::{Error, Result};
use crate::matkit::{
    ensure_finite, ensure_square, identity, kernel_basis, pseudo_inverse, spectral_norm, symmetric_eigenvalues,
    symmetric_part, Matrix, Tolerances, Vector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Iteration cap for each of the two phases.
    pub max_iter: usize,
    /// Initial point: `0` starts from the identity, anything else perturbs it.
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            seed: 0,
        }
    }
}

/// Re-checks a candidate against the original (unnormalised) modes.
/// `P > 0` and `PF + F'P < 0` are required strictly for `strict`, the
/// non-strict ones only up to `+tol |P| |F|`.
pub fn verify_common_p(p: &Matrix, strict: &[Matrix], nonstrict: &[Matrix], tol: &Tolerances) -> Result<Vec<Margin>> {
    let pn = spectral_norm(p);
    let eig = symmetric_eigenvalues(p)?;
    let mut out = vec![Margin::new("P > 0", eig[0], tol.definiteness * pn, true)];
    for (label, group, is_strict) in [("strict", strict, true), ("nonstrict", nonstrict, false)] {
        for (k, f) in group.iter().enumerate() {
            let scale = tol.definiteness * pn * spectral_norm(f);
            let e = symmetric_eigenvalues(&lyapunov_form(p, f))?;
            let value = -e[e.len() - 1];
            let required = if is_strict { scale } else { -scale };
            out.push(Margin::new(
                format!("{label}[{k}]: PF + F'P"),
                value,
                required,
                is_strict,
            ));
        }
    }
    Ok(out)
}

/// Singular-value cutoff for kernels of the normalised modes.
const KERNEL_TOL: f64 = 1e-10;

struct Block {
    /// Maps coordinates to the column-major vec of a `d x d` symmetric block.
    map: Matrix,
    dim: usize,
    shift: f64,
}

fn sym_basis(n: usize) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..n {
        for b in a..n {
            let mut s = Matrix::zeros(n, n);
            if a == b {
                s[(a, a)] = 1.0;
            } else {
                s[(a, b)] = r;
                s[(b, a)] = r;
            }
            out.push(s);
        }
    }
    out
}

fn block_of(basis: &[Matrix], dim: usize, shift: f64, image: impl Fn(&Matrix) -> Matrix) -> Block {
    let mut map = Matrix::zeros(dim * dim, basis.len());
    for (k, s) in basis.iter().enumerate() {
        let q = image(s);
        map.column_mut(k).copy_from_slice(q.as_slice());
    }
    Block { map, dim, shift }
}

fn coords(basis: &[Matrix], p: &Matrix) -> Vector {
    Vector::from_iterator(basis.len(), basis.iter().map(|s| s.dot(p)))
}

fn assemble(basis: &[Matrix], x: &Vector) -> Matrix {
    let n = basis[0].nrows();
    basis
        .iter()
        .zip(x.iter())
        .fold(Matrix::zeros(n, n), |acc, (s, c)| acc + s * *c)
}

/// Projection of a symmetric block onto `{Q : Q >= shift I}`.
fn clamp(q: &Matrix, shift: f64) -> Matrix {
    let eig = nalgebra::SymmetricEigen::new(symmetric_part(q));
    let vals = eig.eigenvalues.map(|l| l.max(shift));
    &eig.eigenvectors * Matrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

struct Phase {
    blocks: Vec<Block>,
    /// Coordinates of the equality-constrained subspace.
    null: Matrix,
    /// `null * pinv(stacked maps * null)`.
    back: Matrix,
}

impl Phase {
    fn new(blocks: Vec<Block>, equalities: Option<Matrix>, m: usize) -> Result<Self> {
        let null = match equalities {
            Some(g) if g.nrows() > 0 => kernel_basis(&g, None)?.basis().clone(),
            _ => identity(m),
        };
        let rows: usize = blocks.iter().map(|b| b.map.nrows()).sum();
        let mut stacked = Matrix::zeros(rows, m);
        let mut r0 = 0;
        for b in &blocks {
            stacked.rows_mut(r0, b.map.nrows()).copy_from(&b.map);
            r0 += b.map.nrows();
        }
        let reduced = stacked * &null;
        let cutoff = 1e-12 * spectral_norm(&reduced).max(f64::MIN_POSITIVE);
        let pinv = pseudo_inverse(&reduced, cutoff)?;
        let back = &null * pinv;
        Ok(Self { blocks, null, back })
    }

    fn run(
        &self,
        basis: &[Matrix],
        start: &Vector,
        accept: &dyn Fn(&Matrix) -> Result<bool>,
        max_iter: usize,
    ) -> Result<(Option<Matrix>, usize)> {
        let mut x = &self.null * (self.null.transpose() * start);
        let total: usize = self.blocks.iter().map(|b| b.dim * b.dim).sum();
        let mut target = Vector::zeros(total);
        for it in 0..max_iter {
            let p = assemble(basis, &x);
            if accept(&p)? {
                return Ok((Some(p), it));
            }
            let mut r0 = 0;
            for b in &self.blocks {
                let len = b.dim * b.dim;
                let v = &b.map * &x;
                let q = Matrix::from_column_slice(b.dim, b.dim, v.as_slice());
                target.rows_mut(r0, len).copy_from_slice(clamp(&q, b.shift).as_slice());
                r0 += len;
            }
            x = &self.back * &target;
        }
        Ok((None, max_iter))
    }
}

fn validate(ms: &[Matrix], n: usize) -> Result<()> {
    for f in ms {
        ensure_square(f, "mode matrix")?;
        ensure_finite(f, "mode matrix")?;
        if f.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "mode matrix is {}x{}, expected {n}x{n}",
                f.nrows(),
                f.ncols()
            )));
        }
    }
    Ok(())
}

/// Searches `P > 0` with `PF + F'P < 0` for every `F` in `strict` and
/// `PF + F'P <= 0` for every `F` in `nonstrict`.
///
/// Non-strict modes are first handled through their kernels: `F'PK = 0` on
/// `K = ker F` and strict decrease on the complement. Should that fail, a
/// plain `<= 0` formulation is tried. A miss is inconclusive.
pub fn search_common_p(strict: &[Matrix], nonstrict: &[Matrix], opts: &SearchOptions) -> Result<LyapunovCertificate> {
    let first = strict
        .first()
        .or(nonstrict.first())
        .ok_or_else(|| Error::InvalidArgument("no modes given".into()))?;
    let n = first.nrows();
    validate(strict, n)?;
    validate(nonstrict, n)?;
    let tol = Tolerances::default();

    let normalise = |f: &Matrix| {
        let s = spectral_norm(f);
        (s > 0.0).then(|| f / s)
    };
    let strict_n: Vec<Matrix> = strict.iter().filter_map(normalise).collect();
    if strict_n.len() < strict.len() {
        // F = 0 can never satisfy a strict decrease
        return Err(Error::CertificateNotFound { iterations: 0 });
    }
    let nonstrict_n: Vec<Matrix> = nonstrict.iter().filter_map(normalise).collect();

    let basis = sym_basis(n);
    let m = basis.len();
    let mut start = coords(&basis, &identity(n));
    if opts.seed != 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for v in start.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += 0.5 * z;
        }
    }

    let accept =
        |p: &Matrix| -> Result<bool> { Ok(verify_common_p(p, strict, nonstrict, &tol)?.iter().all(Margin::passed)) };

    let common = |blocks: &mut Vec<Block>| {
        blocks.push(block_of(&basis, n, 1.0, |s| s.clone()));
        for f in &strict_n {
            blocks.push(block_of(&basis, n, 1.0, |s| -lyapunov_form(s, f)));
        }
    };

    // phase 1: kernel-aware
    let mut blocks = Vec::new();
    common(&mut blocks);
    let mut eq_rows: Vec<Vec<f64>> = Vec::new();
    for f in &nonstrict_n {
        let ker = kernel_basis(f, Some(KERNEL_TOL))?;
        let w = ker.complement();
        if !w.is_trivial() {
            let wb = w.basis().clone();
            blocks.push(block_of(&basis, wb.ncols(), 1.0, |s| {
                wb.transpose() * (-lyapunov_form(s, f)) * &wb
            }));
        }
        if !ker.is_trivial() {
            let k = ker.basis();
            let cols: Vec<Matrix> = basis.iter().map(|s| f.transpose() * s * k).collect();
            for r in 0..n * k.ncols() {
                eq_rows.push(cols.iter().map(|c| c.as_slice()[r]).collect());
            }
        }
    }
    let g =
        (!eq_rows.is_empty()).then(|| Matrix::from_row_iterator(eq_rows.len(), m, eq_rows.iter().flatten().copied()));
    let phase1 = Phase::new(blocks, g, m)?;
    let (found, used1) = phase1.run(&basis, &start, &accept, opts.max_iter)?;
    let (found, used) = match found {
        Some(p) => (Some(p), used1),
        None if nonstrict_n.is_empty() => (None, used1),
        None => {
            let mut blocks = Vec::new();
            common(&mut blocks);
            for f in &nonstrict_n {
                blocks.push(block_of(&basis, n, 0.0, |s| -lyapunov_form(s, f)));
            }
            let phase2 = Phase::new(blocks, None, m)?;
            let (p, used2) = phase2.run(&basis, &start, &accept, opts.max_iter)?;
            (p, used1 + used2)
        }
    };

    let p = found.ok_or(Error::CertificateNotFound { iterations: used })?;
    let p = symmetric_part(&(&p / spectral_norm(&p)));
    let margins = verify_common_p(&p, strict, nonstrict, &tol)?;
    if !margins.iter().all(Margin::passed) {
        return Err(Error::CertificateNotFound { iterations: used });
    }
    Ok(LyapunovCertificate {
        p,
        kappa1: 0.0,
        kappa2: 0.0,
        margins,
        method: CertificateMethod::Searched,
        definiteness_tol: tol.definiteness,
        iterations: Some(used),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn single_hurwitz_mode() {
        let f = dmatrix![-1.0, 5.0; 0.0, -2.0];
        let cert = search_common_p(std::slice::from_ref(&f), &[], &SearchOptions::default()).unwrap();
        assert!(cert.all_margins_pass());
        let e = symmetric_eigenvalues(&lyapunov_form(&cert.p, &f)).unwrap();
        assert!(e[1] < 0.0);
    }

    #[test]
    fn unstable_mode_not_found() {
        let f = dmatrix![1.0, 0.0; 0.0, -1.0];
        let r = search_common_p(&[f], &[], &SearchOptions { max_iter: 200, seed: 0 });
        assert!(matches!(r, Err(Error::CertificateNotFound { .. })));
    }

    #[test]
    fn nonstrict_singular_mode() {
        // F2 has a kernel; F1 strict
        let f1 = dmatrix![-1.0, 0.0; 0.0, -1.0];
        let f2 = dmatrix![-1.0, 0.0; 0.0, 0.0];
        let cert = search_common_p(&[f1], &[f2], &SearchOptions::default()).unwrap();
        assert!(cert.all_margins_pass());
    }

    #[test]
    fn seeded_start_also_converges() {
        let f = dmatrix![-0.5, 2.0; -2.0, -0.5];
        let cert = search_common_p(
            &[f],
            &[],
            &SearchOptions {
                max_iter: 5000,
                seed: 7,
            },
        )
        .unwrap();
        assert!(cert.all_margins_pass());
    }
}
