use nalgebra::DVector;
use rand::Rng;

use super::GaussianParams;
use crate::error::{Result, SmcError};
use crate::math::log_sum_exp;

/// Tolerance on the mixture weights summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Gaussian mixture `sum_m w_m N(mu_m, Sigma_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    weights: Vec<f64>,
    components: Vec<GaussianParams>,
}

impl GmmParams {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianParams>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(SmcError::InvalidMixtureWeights(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(SmcError::InvalidMixtureWeights(format!(
                "weight {w} outside [0, 1]"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(SmcError::InvalidMixtureWeights(format!(
                "weights sum to {total}"
            )));
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(SmcError::DimensionMismatch {
                expected: d,
                got: c.dim(),
            });
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn single(component: GaussianParams) -> Self {
        Self {
            weights: vec![1.0],
            components: vec![component],
        }
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianParams] {
        &self.components
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w.ln() + c.log_pdf(x))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.components.len() - 1;
        for (m, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                chosen = m;
                break;
            }
        }
        self.components[chosen].sample(rng)
    }

    /// Analytic mean and covariance of the mixture.
    pub fn moments(&self) -> (DVector<f64>, nalgebra::DMatrix<f64>) {
        let d = self.dim();
        let mut mean = DVector::zeros(d);
        for (w, c) in self.weights.iter().zip(&self.components) {
            mean.axpy(*w, c.mean(), 1.0);
        }
        let mut cov = nalgebra::DMatrix::zeros(d, d);
        for (w, c) in self.weights.iter().zip(&self.components) {
            let dm = c.mean() - &mean;
            cov += (c.cov() + &dm * dm.transpose()) * *w;
        }
        (mean, cov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bimodal() -> GmmParams {
        GmmParams::new(
            vec![0.5, 0.5],
            vec![
                GaussianParams::univariate(-3.0, 1.0).unwrap(),
                GaussianParams::univariate(3.0, 1.0).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_component_matches_gaussian() {
        let g = GaussianParams::univariate(0.7, 2.5).unwrap();
        let mix = GmmParams::single(g.clone());
        for x in [-3.0, 0.0, 0.7, 4.2] {
            let x = DVector::from_element(1, x);
            assert_eq!(mix.log_pdf(&x), g.log_pdf(&x));
        }
    }

    #[test]
    fn bimodal_target_at_origin() {
        let n = |x: f64, mu: f64| (-(x - mu).powi(2) / 2.0).exp() / (2.0 * PI).sqrt();
        let expected = (0.5 * n(0.0, -3.0) + 0.5 * n(0.0, 3.0)).ln();
        let got = bimodal().log_pdf(&DVector::from_element(1, 0.0));
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn symmetric_mixture_is_even() {
        let mix = bimodal();
        for x in [0.3, 1.7, 5.0] {
            let a = mix.log_pdf(&DVector::from_element(1, x));
            let b = mix.log_pdf(&DVector::from_element(1, -x));
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn bimodal_moments() {
        let (m, c) = bimodal().moments();
        assert_eq!(m[0], 0.0);
        assert!((c[(0, 0)] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_weights() {
        let g = GaussianParams::standard(1);
        assert!(GmmParams::new(vec![0.5, 0.6], vec![g.clone(), g.clone()]).is_err());
        assert!(GmmParams::new(vec![1.5, -0.5], vec![g.clone(), g.clone()]).is_err());
        assert!(GmmParams::new(vec![1.0], vec![g.clone(), g]).is_err());
    }
}
