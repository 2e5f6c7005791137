//! Combining per-iteration estimates with ESS-maximising constants.
//!
//! Each iteration contributes its self-normalised estimate together with
//! `l_k = (sum w)^2 / sum w^2`. The combined estimate weights iteration `k`
//! by `c_k = l_k / sum_j l_j`, which maximises the ESS of the pooled
//! weighted sample under the simplex constraint on `c`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SmcError};
use crate::linalg;
use crate::smc::{ess, Moments};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecyclingState {
    l_values: Vec<f64>,
    means: Vec<DVector<f64>>,
    second_moments: Vec<DMatrix<f64>>,
}

impl RecyclingState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends iteration `k`. `log_w` must be the weights the estimate was
    /// formed from, before any resampling reset.
    pub fn update(&mut self, log_w: &[f64], moments: &Moments) -> Result<()> {
        let l = ess(log_w)?;
        self.push(l, moments);
        Ok(())
    }

    pub(crate) fn push(&mut self, l: f64, moments: &Moments) {
        self.l_values.push(l);
        self.means.push(moments.mean.clone());
        self.second_moments.push(moments.second_moment());
    }

    pub fn len(&self) -> usize {
        self.l_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l_values.is_empty()
    }

    pub fn l_values(&self) -> &[f64] {
        &self.l_values
    }

    /// `c_k = l_k / sum_j l_j`.
    pub fn constants(&self) -> Vec<f64> {
        optimal_constants(&self.l_values)
    }

    /// Convex combination of the per-iteration means and second moments;
    /// the covariance is rebuilt from the recycled pair.
    pub fn recycled_estimate(&self) -> Result<Moments> {
        if self.is_empty() {
            return Err(SmcError::InvalidConfig(
                "no iterations recorded for recycling".into(),
            ));
        }
        let c = self.constants();
        let d = self.means[0].len();
        let mut mean = DVector::zeros(d);
        let mut second = DMatrix::zeros(d, d);
        for ((ck, m), s) in c.iter().zip(&self.means).zip(&self.second_moments) {
            mean.axpy(*ck, m, 1.0);
            second += s * *ck;
        }
        let mut cov = second - &mean * mean.transpose();
        linalg::symmetrize(&mut cov);
        Ok(Moments { mean, cov })
    }
}

pub fn optimal_constants(l_values: &[f64]) -> Vec<f64> {
    let total: f64 = l_values.iter().sum();
    l_values.iter().map(|l| l / total).collect()
}

/// ESS of the pooled sample when iteration `k` is scaled by `c[k]`:
/// `[sum_k sum_i (c_k wbar_ki)^2]^{-1} = [sum_k c_k^2 / l_k]^{-1}`.
pub fn recycled_ess(l_values: &[f64], c: &[f64]) -> f64 {
    assert_eq!(l_values.len(), c.len());
    let s: f64 = l_values.iter().zip(c).map(|(l, ck)| ck * ck / l).sum();
    1.0 / s
}
