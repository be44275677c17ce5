//! Dense complex linear-algebra helpers shared by the simulation modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Solves `a x = b` for Hermitian positive-definite `a` through a Cholesky
/// factorization.
pub fn hermitian_solve(a: &CMat, b: &CMat) -> Result<CMat> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{}x{} Cholesky failed", a.nrows(), a.ncols())))?;
    Ok(chol.solve(b))
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn hermitian_inverse(a: CMat) -> Result<CMat> {
    let n = a.nrows();
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{n}x{n} Cholesky failed")))?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Replaces `m` by `(m + m^H) / 2`.
pub fn symmetrize(m: &mut CMat) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// `x^H x + alpha I`.
pub fn regularized_gram(x: &CMat, alpha: f64) -> CMat {
    let mut g = x.ad_mul(x);
    for i in 0..g.nrows() {
        g[(i, i)] += alpha;
    }
    g
}

/// `tr(a b)` without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> Complex64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn frobenius_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    let n = m.nrows();
    (0..n).all(|i| (i..n).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol * scale))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn spectral_norm_hermitian(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max)
}

/// Principal square root of a Hermitian nonnegative-definite matrix.
pub fn hermitian_sqrt(m: &CMat) -> Result<CMat> {
    let eig = m.clone().symmetric_eigen();
    let scale = eig
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .fold(1.0_f64, f64::max);
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * scale) {
        return Err(Error::Singular("matrix is not nonnegative definite".into()));
    }
    let u = &eig.eigenvectors;
    let roots = eig
        .eigenvalues
        .map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0));
    let mut scaled = u.clone();
    for (j, r) in roots.iter().enumerate() {
        scaled.column_mut(j).scale_mut(r.re);
    }
    Ok(scaled * u.adjoint())
}

/// `u^H m v`.
pub fn quad_form(u: &CVec, m: &CMat, v: &CVec) -> Complex64 {
    u.dotc(&(m * v))
}

/// Applies the inverse of `A - v v^H` given `A^{-1}` (Hermitian), using the
/// Sherman-Morrison downdate.
pub struct RankOneDowndate<'a> {
    a_inv: &'a CMat,
    a_inv_v: CVec,
    denom: f64,
}

impl<'a> RankOneDowndate<'a> {
    pub fn new(a_inv: &'a CMat, v: &CVec) -> Result<Self> {
        let a_inv_v = a_inv * v;
        let denom = 1.0 - v.dotc(&a_inv_v).re;
        if denom <= 0.0 || !denom.is_finite() {
            return Err(Error::Singular(format!(
                "rank-one downdate is not positive definite (1 - v^H A^-1 v = {denom:e})"
            )));
        }
        Ok(Self {
            a_inv,
            a_inv_v,
            denom,
        })
    }

    /// `(A - v v^H)^{-1} u`.
    pub fn apply(&self, u: &CVec) -> CVec {
        let mut out = self.a_inv * u;
        let coef = self.a_inv_v.dotc(u) / self.denom;
        out.axpy(coef, &self.a_inv_v, Complex64::new(1.0, 0.0));
        out
    }
}
