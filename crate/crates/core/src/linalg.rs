//! Dense complex linear-algebra helpers shared by the simulator and the estimators.
//!
//! Every matrix is column-major, so `vec(A)` is simply the storage slice of `A`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub const J: C64 = C64::new(0.0, 1.0);

/// `vec(A)`: stack the columns of `a`.
pub fn vectorize(a: &CMat) -> CVec {
    CVec::from_column_slice(a.as_slice())
}

/// Inverse of [`vectorize`], preserving column ordering.
pub fn reshape(v: &CVec, rows: usize, cols: usize) -> CMat {
    assert_eq!(v.len(), rows * cols, "reshape length mismatch");
    CMat::from_column_slice(rows, cols, v.as_slice())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Column-wise Kronecker product: column `k` is `a[:,k] ⊗ b[:,k]`.
pub fn khatri_rao(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "khatri-rao needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ra, rb) = (a.nrows(), b.nrows());
    Ok(CMat::from_fn(ra * rb, a.ncols(), |row, k| a[(row / rb, k)] * b[(row % rb, k)]))
}

pub fn frobenius_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn to_complex(a: &RMat) -> CMat {
    a.map(|x| C64::new(x, 0.0))
}

/// Replace `a` by `(a + aᴴ)/2`.
pub fn hermitize(a: &mut CMat) {
    let n = a.nrows();
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

/// Cholesky factorisation of a Hermitian positive definite matrix.
///
/// Falls back to a diagonal jitter of `1e-12·tr(A)/n` when the plain
/// factorisation fails; the returned flag records whether that happened.
pub fn hpd_cholesky(a: &CMat) -> Result<(nalgebra::Cholesky<C64, nalgebra::Dyn>, bool)> {
    let mut m = a.clone();
    hermitize(&mut m);
    if let Some(ch) = m.clone().cholesky().filter(real_positive_diagonal) {
        return Ok((ch, false));
    }
    let n = m.nrows().max(1);
    let trace: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
    let jitter = 1e-12 * trace.abs() / n as f64;
    log::warn!("cholesky failed on {n}x{n} system, retrying with jitter {jitter:e}");
    for i in 0..m.nrows() {
        m[(i, i)] += C64::new(jitter, 0.0);
    }
    m.cholesky()
        .filter(real_positive_diagonal)
        .map(|ch| (ch, true))
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{n}x{n} system after jitter")))
}

// The complex factorisation takes principal square roots, so an indefinite
// input yields an imaginary pivot rather than a failure.
fn real_positive_diagonal(ch: &nalgebra::Cholesky<C64, nalgebra::Dyn>) -> bool {
    ch.l_dirty().diagonal().iter().all(|d| d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-8 * d.re)
}

/// Inverse of a Hermitian positive definite matrix plus `ln det`.
pub fn hpd_inverse(a: &CMat) -> Result<(CMat, f64)> {
    let (ch, _) = hpd_cholesky(a)?;
    let logdet = 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>();
    let mut inv = ch.inverse();
    hermitize(&mut inv);
    Ok((inv, logdet))
}

/// Minimum-norm right inverse `aᴴ (a aᴴ)⁻¹` of a wide, full-row-rank matrix.
pub fn right_pseudo_inverse(a: &CMat) -> Result<CMat> {
    let gram = a * a.adjoint();
    let (ch, _) = hpd_cholesky(&gram)?;
    let inv = ch.inverse();
    Ok(a.adjoint() * inv)
}

/// Solve the least-squares problem `min ‖a x − b‖` for a tall full-column-rank `a`.
pub fn least_squares(a: &CMat, b: &CVec) -> Result<CVec> {
    if a.nrows() < a.ncols() {
        return Err(Error::Dimension(format!(
            "least squares needs rows >= cols, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let qr = a.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let rhs = q.adjoint() * b;
    r.solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::NotPositiveDefinite("rank-deficient least-squares system".into()))
}

pub fn db10(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db10(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
