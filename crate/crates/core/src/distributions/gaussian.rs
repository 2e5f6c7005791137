use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SmcError};
use crate::linalg::{self, JITTER};

/// Multivariate normal `N(mean, cov)` with a cached Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianParams {
    /// Validates symmetry and factorises `cov`. A covariance that is only
    /// semi-definite is accepted if it factorises after diagonal jitter.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(SmcError::DimensionMismatch {
                expected: mean.len(),
                got: cov.nrows().max(cov.ncols()),
            });
        }
        let chol = linalg::cholesky_lower(&cov)?;
        let d = mean.len() as f64;
        let log_norm = -0.5 * d * (2.0 * PI).ln() - linalg::half_log_det(&chol);
        Ok(Self {
            mean,
            cov,
            chol,
            log_norm,
        })
    }

    /// Univariate convenience constructor; `var` is a variance.
    pub fn univariate(mean: f64, var: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, var),
        )
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim))
            .expect("identity covariance is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower Cholesky factor actually used for density evaluation and
    /// sampling (includes jitter if the plain factorisation failed).
    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Same covariance (and factor), different mean.
    pub(crate) fn recentred(&self, mean: DVector<f64>) -> Self {
        assert_eq!(mean.len(), self.dim());
        Self {
            mean,
            ..self.clone()
        }
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        assert_eq!(x.len(), self.dim(), "point dimension mismatch");
        let mut diff = x - &self.mean;
        self.log_norm - 0.5 * linalg::whitened_norm_sq(&self.chol, &mut diff)
    }

    /// Log-density of `mean + offset`, reusing `scratch` to avoid allocation.
    pub(crate) fn log_pdf_centered(
        &self,
        offset: &DVector<f64>,
        scratch: &mut DVector<f64>,
    ) -> f64 {
        scratch.copy_from(offset);
        self.log_norm - 0.5 * linalg::whitened_norm_sq(&self.chol, scratch)
    }

    pub(crate) fn log_pdf_with(&self, x: &DVector<f64>, scratch: &mut DVector<f64>) -> f64 {
        scratch.copy_from(x);
        *scratch -= &self.mean;
        self.log_norm - 0.5 * linalg::whitened_norm_sq(&self.chol, scratch)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.chol * z
    }
}

/// Weighted mean and covariance (weights need not be normalised). The
/// covariance uses the weight total as denominator, then `jitter` is added
/// to its diagonal.
pub(crate) fn weighted_moments(
    samples: &[DVector<f64>],
    weights: impl Fn(usize) -> f64,
    jitter: f64,
) -> (DVector<f64>, DMatrix<f64>, f64) {
    let d = samples[0].len();
    let mut total = 0.0;
    let mut mean = DVector::zeros(d);
    for (i, x) in samples.iter().enumerate() {
        let w = weights(i);
        total += w;
        mean.axpy(w, x, 1.0);
    }
    mean /= total;

    let mut cov = DMatrix::zeros(d, d);
    let mut diff = DVector::zeros(d);
    for (i, x) in samples.iter().enumerate() {
        let w = weights(i);
        diff.copy_from(x);
        diff -= &mean;
        cov.ger(w, &diff, &diff, 1.0);
    }
    cov /= total;
    linalg::symmetrize(&mut cov);
    for j in 0..d {
        cov[(j, j)] += jitter;
    }
    (mean, cov, total)
}

/// Sample mean and maximum-likelihood covariance (denominator N) of the
/// rows, plus `JITTER` on the diagonal.
pub fn fit_gaussian(samples: &[DVector<f64>]) -> Result<GaussianParams> {
    let d = check_samples(samples)?;
    if samples.len() < d + 1 {
        return Err(SmcError::InsufficientSamples {
            needed: d + 1,
            got: samples.len(),
        });
    }
    let (mean, cov, _) = weighted_moments(samples, |_| 1.0, JITTER);
    GaussianParams::new(mean, cov)
}

pub(crate) fn check_samples(samples: &[DVector<f64>]) -> Result<usize> {
    let Some(first) = samples.first() else {
        return Err(SmcError::InsufficientSamples { needed: 1, got: 0 });
    };
    let d = first.len();
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(SmcError::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    Ok(d)
}
