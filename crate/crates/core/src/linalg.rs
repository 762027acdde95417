//! Small dense complex linear algebra used throughout the crate.
//!
//! Everything here works on dynamically sized `nalgebra` matrices; the
//! matrices involved are at most a few dozen entries, so clarity wins over
//! blocking or in-place tricks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Real matrix from row-major data.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMat {
    assert_eq!(data.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| re(data[i * cols + j]))
}

pub fn real_diag(entries: &[f64]) -> CMat {
    let n = entries.len();
    CMat::from_fn(n, n, |i, j| if i == j { re(entries[i]) } else { ZERO })
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_real(m: &CMat) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// The standard symplectic matrix `[[0, I], [-I, 0]]` of size `2d`.
pub fn symplectic_j(d: usize) -> CMat {
    let mut j = CMat::zeros(2 * d, 2 * d);
    for i in 0..d {
        j[(i, d + i)] = ONE;
        j[(d + i, i)] = -ONE;
    }
    j
}

/// `J * m` without forming `J`: top block gets the bottom rows, bottom block
/// gets minus the top rows.
pub fn apply_j(m: &CMat) -> CMat {
    let n = m.nrows();
    let d = n / 2;
    CMat::from_fn(n, m.ncols(), |i, j| if i < d { m[(i + d, j)] } else { -m[(i - d, j)] })
}

/// `J^{-1} * m = -J * m`.
pub fn apply_j_inv(m: &CMat) -> CMat {
    let n = m.nrows();
    let d = n / 2;
    CMat::from_fn(n, m.ncols(), |i, j| if i < d { -m[(i + d, j)] } else { m[(i - d, j)] })
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    frobenius(&(m - m.adjoint()))
}

/// Matrix exponential by scaling and squaring of the diagonal (6,6) Padé
/// approximant.
///
/// Diagonal Padé approximants satisfy `r(z) r(-z) = 1` with real
/// coefficients, so for a generator with `G* J + J G = 0` the result is
/// conjugate-symplectic up to rounding regardless of the step size.
pub fn expm(a: &CMat) -> CMat {
    const C: [f64; 7] = [
        1.0,
        1.0 / 2.0,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a * re(0.5f64.powi(squarings));

    let id = CMat::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let odd = &scaled * (&id * re(C[1]) + &a2 * re(C[3]) + &a4 * re(C[5]));
    let even = &id * re(C[0]) + &a2 * re(C[2]) + &a4 * re(C[4]) + &a6 * re(C[6]);

    let numer = &even + &odd;
    let denom = &even - &odd;
    let mut result = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Eigenvalues of a general complex matrix (complex Schur form).
pub fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    let ev = m
        .clone()
        .try_schur(1e-15, 10_000)
        .and_then(|s| s.eigenvalues())
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    Ok(ev.iter().copied().collect())
}

/// Matrix sign function by scaled Newton iteration.
///
/// Requires no eigenvalue on the imaginary axis. `(I - sign(A)) / 2` is the
/// spectral projector onto the eigenvalues with negative real part; it is
/// analytic in the entries of `A` and never forms eigenvectors, so it is
/// insensitive to defective or clustered eigenvalues.
pub fn matrix_sign(a: &CMat) -> Result<CMat> {
    let n = a.nrows() as f64;
    let mut s = a.clone();
    let mut scaling = true;
    for _ in 0..200 {
        let lu = s.clone().lu();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Numerical("sign iteration hit a singular matrix".into()))?;
        let mu = if scaling {
            let det = lu.determinant().norm();
            if det > 0.0 && det.is_finite() {
                det.powf(-1.0 / n)
            } else {
                1.0
            }
        } else {
            1.0
        };
        let next = (&s * re(mu) + &inv * re(1.0 / mu)) * re(0.5);
        let change = frobenius(&(&next - &s));
        let size = frobenius(&next);
        s = next;
        if change <= 1e-2 * size {
            scaling = false;
        }
        if change <= 1e-14 * size {
            return Ok(s);
        }
    }
    Err(Error::Numerical("sign iteration did not converge".into()))
}

/// Orthonormal basis for the span of the first `k` dominant left singular
/// directions of `m`.
pub fn orthonormal_range(m: &CMat, k: usize) -> CMat {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    u.columns(0, k).into_owned()
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Orthonormalize the columns of `m` (thin QR), returning `(Q, diag(R))`.
pub fn thin_qr(m: &CMat) -> (CMat, CMat) {
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

/// Largest principal angle between two subspaces of equal dimension, in
/// radians. Computed from the sine form `||(I - Pb) Qa||_2` which stays
/// accurate for small angles.
pub fn max_principal_angle(a: &CMat, b: &CMat) -> f64 {
    let (qa, _) = thin_qr(a);
    let (qb, _) = thin_qr(b);
    let residual = &qa - &qb * (qb.adjoint() * &qa);
    let sin = singular_values(&residual).first().copied().unwrap_or(0.0);
    sin.clamp(0.0, 1.0).asin()
}

/// Smallest principal angle between two subspaces (any dimensions).
pub fn min_principal_angle(a: &CMat, b: &CMat) -> f64 {
    let (qa, _) = thin_qr(a);
    let (qb, _) = thin_qr(b);
    let cos = singular_values(&(qa.adjoint() * &qb)).first().copied().unwrap_or(0.0);
    cos.clamp(0.0, 1.0).acos()
}

pub fn hstack(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Block-diagonal matrix `diag(a, b)`.
pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}
