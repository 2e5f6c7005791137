//! Cholesky plumbing with the diagonal-jitter fallback used throughout.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SmcError};

/// Diagonal regulariser added to fitted covariances, and to any covariance
/// whose plain Cholesky factorisation fails.
pub const JITTER: f64 = 1e-6;

/// Tolerance on `max |C - C^T|` for a matrix to count as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Replace `m` by `(m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Lower Cholesky factor of a symmetric matrix. The matrix is factorised
/// as given first; if that fails, `JITTER` is added to the diagonal and the
/// factorisation retried.
pub fn cholesky_lower(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() {
        return Err(SmcError::DimensionMismatch {
            expected: cov.nrows(),
            got: cov.ncols(),
        });
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(SmcError::SingularCovariance { jitter: JITTER });
    }
    let asym = max_asymmetry(cov);
    if asym > SYMMETRY_TOL {
        return Err(SmcError::AsymmetricCovariance { asymmetry: asym });
    }
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(ch.unpack());
    }
    let jittered = cov + DMatrix::identity(cov.nrows(), cov.ncols()) * JITTER;
    jittered
        .cholesky()
        .map(|ch| ch.unpack())
        .ok_or(SmcError::SingularCovariance { jitter: JITTER })
}

/// `sum(ln(diag(L)))`, i.e. half the log-determinant of `L L^T`.
pub fn half_log_det(lower: &DMatrix<f64>) -> f64 {
    lower.diagonal().iter().map(|d| d.ln()).sum()
}

/// Squared Mahalanobis norm `|L^{-1} diff|^2`, computed in place.
pub fn whitened_norm_sq(lower: &DMatrix<f64>, diff: &mut DVector<f64>) -> f64 {
    let ok = lower.solve_lower_triangular_mut(diff);
    debug_assert!(ok, "Cholesky factor has a zero on the diagonal");
    diff.norm_squared()
}
