//! Random instance generators for property tests and benchmarks.
//!
//! Pairs are built from quasi-Weierstrass data `E = S^-1 diag(I, N) T^-1`,
//! `A = S^-1 diag(J, I) T^-1` with well-conditioned `S`, `T`, so that the
//! index and the consistency space are known by construction.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matkit::{identity, Matrix};

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    gaussian(rng, n, n).qr().q()
}

/// `U diag(s) V'` with singular values drawn from `[lo, hi]`.
pub fn conditioned<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Matrix {
    let s = Matrix::from_diagonal(&crate::matkit::Vector::from_fn(n, |_, _| rng.random_range(lo..=hi)));
    orthogonal(rng, n) * s * orthogonal(rng, n).transpose()
}

/// Nilpotent matrix of size `q` and nilpotency index exactly `k`
/// (Jordan blocks, the first of size `k`, in a random basis).
pub fn nilpotent<R: Rng + ?Sized>(rng: &mut R, q: usize, k: usize) -> Matrix {
    assert!(k >= 1 && k <= q.max(1));
    let mut n = Matrix::zeros(q, q);
    let mut start = 0;
    let mut first = true;
    while start < q {
        let size = if first {
            k
        } else {
            rng.random_range(1..=k.min(q - start))
        };
        first = false;
        for i in 0..size.saturating_sub(1) {
            n[(start + i, start + i + 1)] = 1.0;
        }
        start += size;
    }
    let t = conditioned(rng, q, 0.5, 2.0);
    let t_inv = t.clone().try_inverse().expect("well-conditioned");
    t * n * t_inv
}

/// Hurwitz matrix: `-(M M' + 0.2 I) + K` with `K` skew.
pub fn hurwitz<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let m = gaussian(rng, n, n) * 0.5;
    let k = gaussian(rng, n, n);
    -(&m * m.transpose() + identity(n) * 0.2) + (&k - k.transpose()) * 0.5
}

/// Quasi-Weierstrass data of a generated pair.
#[derive(Debug, Clone)]
pub struct QwPair {
    pub e: Matrix,
    pub a: Matrix,
    pub s: Matrix,
    pub t: Matrix,
    pub j: Matrix,
    pub n: Matrix,
    pub index: usize,
    /// Dimension of the consistency space.
    pub p: usize,
}

/// Regular pair of dimension `dim` and the given index (`0` gives a
/// standard system). With `stable` the finite dynamics `J` is Hurwitz.
pub fn qw_pair<R: Rng + ?Sized>(rng: &mut R, dim: usize, index: usize, stable: bool) -> QwPair {
    let q = if index == 0 {
        0
    } else {
        // leave at least one finite eigenvalue for index one, else E = 0
        let max_q = if index == 1 { dim - 1 } else { dim };
        rng.random_range(index..=max_q.max(index))
    };
    let p = dim - q;
    let j = if stable {
        hurwitz(rng, p)
    } else {
        conditioned(rng, p, 0.5, 2.0)
    };
    let n = if q > 0 {
        nilpotent(rng, q, index)
    } else {
        Matrix::zeros(0, 0)
    };
    let s = conditioned(rng, dim, 0.5, 2.0);
    let t = conditioned(rng, dim, 0.5, 2.0);
    let s_inv = s.clone().try_inverse().expect("well-conditioned");
    let t_inv = t.clone().try_inverse().expect("well-conditioned");
    let mut e_blk = identity(dim);
    let mut a_blk = identity(dim);
    e_blk.view_mut((p, p), (q, q)).copy_from(&n);
    a_blk.view_mut((0, 0), (p, p)).copy_from(&j);
    QwPair {
        e: &s_inv * e_blk * &t_inv,
        a: &s_inv * a_blk * &t_inv,
        s,
        t,
        j,
        n,
        index,
        p,
    }
}

/// Solves `X J + J' X = -W` (Kronecker form; small sizes only).
pub fn lyapunov_solve(j: &Matrix, w: &Matrix) -> Option<Matrix> {
    let p = j.nrows();
    if p == 0 {
        return Some(Matrix::zeros(0, 0));
    }
    let ident = identity(p);
    let kron = ident.kronecker(&j.transpose()) + j.transpose().kronecker(&ident);
    let rhs = -crate::matkit::Vector::from_column_slice(w.as_slice());
    let x = kron.lu().solve(&rhs)?;
    let x = Matrix::from_column_slice(p, p, x.as_slice());
    Some((&x + x.transpose()) * 0.5)
}

/// A Lyapunov matrix for a stable generated pair: `T^-T [[X, B], [B', R]] T^-1`
/// with `X J + J' X = -I`, random coupling `B` and random positive `R`.
pub fn lyapunov_for<R: Rng + ?Sized>(rng: &mut R, pair: &QwPair) -> Matrix {
    let dim = pair.e.nrows();
    let (p, q) = (pair.p, dim - pair.p);
    let x = lyapunov_solve(&pair.j, &identity(p)).expect("Hurwitz J");
    let mut blk = Matrix::zeros(dim, dim);
    blk.view_mut((0, 0), (p, p)).copy_from(&x);
    if q > 0 {
        let r = gaussian(rng, q, q);
        blk.view_mut((p, p), (q, q))
            .copy_from(&(&r * r.transpose() + identity(q)));
        let b = gaussian(rng, p, q);
        blk.view_mut((0, p), (p, q)).copy_from(&b);
        blk.view_mut((p, 0), (q, p)).copy_from(&b.transpose());
    }
    let t_inv = pair.t.clone().try_inverse().expect("well-conditioned");
    let out = t_inv.transpose() * blk * t_inv;
    (&out + out.transpose()) * 0.5
}

pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let g = gaussian(rng, n, n);
    (&g + g.transpose()) * 0.5
}

/// `(A, B)` meeting the kernel-lemma hypotheses: `B = S + K` with `S >= 0`
/// of rank `r`, `K` skew vanishing on `ker S`, and `A = B + G H'` of rank
/// `n - r` with `A + A'` positive definite (rejection-sampled).
pub fn kernel_lemma_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, r: usize) -> (Matrix, Matrix) {
    assert!(r < n);
    loop {
        let q = orthogonal(rng, n);
        let u = q.columns(0, r).into_owned();
        let kern = q.columns(r, n - r).into_owned();
        let m = gaussian(rng, r, r);
        let s_r = &m * m.transpose() + identity(r) * 0.1;
        let k0 = gaussian(rng, r, r);
        let k_r = &k0 - k0.transpose();
        let b = &u * (s_r + k_r) * u.transpose();
        // G = ker basis, H' = D ker' + L u'
        let d = conditioned(rng, n - r, 0.5, 2.0) + identity(n - r) * 2.0;
        let l = gaussian(rng, n - r, r) * 0.3;
        let a = &b + &kern * (&d * kern.transpose() + l * u.transpose());
        let sym = &a + a.transpose();
        if crate::matkit::symmetric_eigenvalues(&sym).is_ok_and(|e| e[0] > 1e-3) {
            return (a, b);
        }
    }
}
