use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::distributions::GaussianParams;
use crate::error::{Result, SmcError};

/// Initial proposal `q(x_1)` and the Gaussian random-walk general proposal
/// `q(x_k | x_{k-1}) = N(x_k; x_{k-1}, C)`.
#[derive(Debug, Clone)]
pub struct ProposalSpec {
    initial: GaussianParams,
    step: GaussianParams,
}

impl ProposalSpec {
    pub fn new(initial: GaussianParams, random_walk_cov: DMatrix<f64>) -> Result<Self> {
        let d = initial.dim();
        if random_walk_cov.nrows() != d {
            return Err(SmcError::DimensionMismatch {
                expected: d,
                got: random_walk_cov.nrows(),
            });
        }
        let step = GaussianParams::new(DVector::zeros(d), random_walk_cov)?;
        Ok(Self { initial, step })
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    pub fn initial(&self) -> &GaussianParams {
        &self.initial
    }

    pub fn random_walk_cov(&self) -> &DMatrix<f64> {
        self.step.cov()
    }

    /// Draws `x_k ~ q(. | from)`.
    pub fn propose<R: Rng + ?Sized>(&self, from: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        from + self.step.sample(rng)
    }

    /// `ln q(to | from)`.
    pub fn log_transition(&self, to: &DVector<f64>, from: &DVector<f64>) -> f64 {
        self.step.log_pdf(&(to - from))
    }
}
