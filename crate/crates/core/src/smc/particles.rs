use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::weighted_moments;
use crate::error::{Result, SmcError};
use crate::math::normalized_weights;

/// Weighted particle population at iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    /// Current positions `x_k`.
    pub curr: Vec<DVector<f64>>,
    /// Positions `x_{k-1}` the last weight update was computed from.
    pub prev: Vec<DVector<f64>>,
    /// Unnormalised log importance weights.
    pub log_w: Vec<f64>,
    pub iteration: usize,
}

impl ParticleSystem {
    pub fn len(&self) -> usize {
        self.curr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curr.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.curr.first().map_or(0, |x| x.len())
    }

    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        normalized_weights(&self.log_w).ok_or(SmcError::DegenerateWeights)
    }

    pub fn ess(&self) -> Result<f64> {
        ess(&self.log_w)
    }
}

/// Self-normalised mean and covariance estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl Moments {
    /// `E[x x^T] = cov + mean mean^T`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        &self.cov + &self.mean * self.mean.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResamplingScheme {
    #[default]
    Multinomial,
    Systematic,
}

/// Effective sample size `(sum w)^2 / sum w^2`, evaluated after shifting by
/// the largest log-weight. Clamped to `[1, N]` against rounding.
pub fn ess(log_w: &[f64]) -> Result<f64> {
    if log_w.iter().any(|v| v.is_nan()) {
        return Err(SmcError::DegenerateWeights);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(SmcError::DegenerateWeights);
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for lw in log_w {
        let w = (lw - max).exp();
        s1 += w;
        s2 += w * w;
    }
    Ok((s1 * s1 / s2).clamp(1.0, log_w.len() as f64))
}

/// Draws `N` particles with replacement in proportion to their weights and
/// resets every log-weight to zero. `prev` is carried along with `curr`.
pub fn resample<R: Rng + ?Sized>(
    ps: &ParticleSystem,
    scheme: ResamplingScheme,
    rng: &mut R,
) -> Result<ParticleSystem> {
    let w = ps.normalized_weights()?;
    let idx = resample_indices(&w, scheme, rng);
    Ok(ParticleSystem {
        curr: idx.iter().map(|&i| ps.curr[i].clone()).collect(),
        prev: idx.iter().map(|&i| ps.prev[i].clone()).collect(),
        log_w: vec![0.0; w.len()],
        iteration: ps.iteration,
    })
}

/// Ancestor indices for normalised weights `w`.
pub fn resample_indices<R: Rng + ?Sized>(
    w: &[f64],
    scheme: ResamplingScheme,
    rng: &mut R,
) -> Vec<usize> {
    let n = w.len();
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for wi in w {
        acc += wi;
        cum.push(acc);
    }
    let total = acc;
    let pick = |u: f64| cum.partition_point(|&c| c <= u).min(n - 1);
    match scheme {
        ResamplingScheme::Multinomial => {
            (0..n).map(|_| pick(rng.random::<f64>() * total)).collect()
        }
        ResamplingScheme::Systematic => {
            let u0: f64 = rng.random::<f64>() / n as f64;
            (0..n)
                .map(|i| pick((u0 + i as f64 / n as f64) * total))
                .collect()
        }
    }
}

/// Self-normalised estimates of `E[x]` and `Cov[x]`.
pub fn estimate_moments(ps: &ParticleSystem) -> Result<Moments> {
    let w = ps.normalized_weights()?;
    let (mean, cov, _) = weighted_moments(&ps.curr, |i| w[i], 0.0);
    Ok(Moments { mean, cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn system(points: &[f64], log_w: Vec<f64>) -> ParticleSystem {
        let curr: Vec<_> = points
            .iter()
            .map(|&p| DVector::from_element(1, p))
            .collect();
        ParticleSystem {
            prev: curr.clone(),
            curr,
            log_w,
            iteration: 1,
        }
    }

    #[test]
    fn ess_examples() {
        assert_eq!(ess(&[0.0; 4]).unwrap(), 4.0);
        let mut one_hot = vec![f64::NEG_INFINITY; 5];
        one_hot[2] = 0.0;
        assert_eq!(ess(&one_hot).unwrap(), 1.0);
        assert!((ess(&[0.0, 3f64.ln()]).unwrap() - 1.6).abs() < 1e-12);
        assert!(matches!(
            ess(&[f64::NEG_INFINITY; 3]),
            Err(SmcError::DegenerateWeights)
        ));
        assert!(ess(&[0.0, f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn ess_bounded_and_shift_invariant(
            log_w in proptest::collection::vec(-50.0..50.0f64, 1..200),
        ) {
            let e = ess(&log_w).unwrap();
            prop_assert!(e >= 1.0 && e <= log_w.len() as f64);
            let shifted: Vec<f64> = log_w.iter().map(|v| v + 1e3).collect();
            prop_assert!((ess(&shifted).unwrap() - e).abs() <= 1e-9 * e);
        }
    }

    #[test]
    fn point_mass_resamples_to_copies() {
        let mut lw = vec![f64::NEG_INFINITY; 6];
        lw[4] = 2.0;
        let ps = system(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], lw);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for scheme in [ResamplingScheme::Multinomial, ResamplingScheme::Systematic] {
            let out = resample(&ps, scheme, &mut rng).unwrap();
            assert!(out.curr.iter().all(|x| x[0] == 4.0));
            assert!(out.log_w.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn uniform_multinomial_duplicate_counts() {
        // Count of copies of particle 0 is Binomial(N, 1/N).
        let n = 10;
        let ps = system(&(0..n).map(|i| i as f64).collect::<Vec<_>>(), vec![0.0; n]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let repeats = 10_000;
        let mut total = 0.0;
        let mut total_sq = 0.0;
        for _ in 0..repeats {
            let out = resample(&ps, ResamplingScheme::Multinomial, &mut rng).unwrap();
            let c = out.curr.iter().filter(|x| x[0] == 0.0).count() as f64;
            total += c;
            total_sq += c * c;
        }
        let mean = total / repeats as f64;
        let var = total_sq / repeats as f64 - mean * mean;
        let p = 1.0 / n as f64;
        let expected_var = n as f64 * p * (1.0 - p);
        assert!((mean - 1.0).abs() < 4.0 * (expected_var / repeats as f64).sqrt());
        assert!((var - expected_var).abs() < 0.05);
    }

    #[test]
    fn estimate_with_uniform_weights_is_sample_moments() {
        let ps = system(&[1.0, 2.0, 6.0], vec![0.3; 3]);
        let m = estimate_moments(&ps).unwrap();
        assert!((m.mean[0] - 3.0).abs() < 1e-15);
        assert!((m.cov[(0, 0)] - 14.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn estimate_with_point_mass() {
        let ps = system(&[1.0, -1.0], vec![0.0, f64::NEG_INFINITY]);
        let m = estimate_moments(&ps).unwrap();
        assert_eq!(m.mean[0], 1.0);
        assert_eq!(m.cov[(0, 0)], 0.0);
    }

    #[test]
    fn importance_sampling_estimate() {
        use crate::distributions::GaussianParams;
        let q = GaussianParams::univariate(0.0, 4.0).unwrap();
        let pi = GaussianParams::univariate(1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let curr: Vec<_> = (0..100_000).map(|_| q.sample(&mut rng)).collect();
        let log_w = curr.iter().map(|x| pi.log_pdf(x) - q.log_pdf(x)).collect();
        let ps = ParticleSystem {
            prev: curr.clone(),
            curr,
            log_w,
            iteration: 1,
        };
        let m = estimate_moments(&ps).unwrap();
        assert!((m.mean[0] - 1.0).abs() < 0.05);
    }
}
