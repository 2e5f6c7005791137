//! Expectation-maximisation for full-covariance Gaussian mixtures.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::gaussian::{check_samples, weighted_moments};
use super::{GaussianParams, GmmParams};
use crate::error::{Result, SmcError};
use crate::linalg::JITTER;
use crate::math::log_sum_exp;

/// A component whose responsibility mass falls below this is re-seeded.
pub const EMPTY_COMPONENT_MASS: f64 = 1e-10;

/// How the initial responsibilities are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmInit {
    /// Hard assignment from k-means with k-means++ seeding.
    #[default]
    KMeans,
    /// Each sample assigned to a uniformly random component.
    RandomAssignment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    pub init: EmInit,
    pub max_iterations: usize,
    /// Stop once the mean per-sample log-likelihood changes by less than
    /// this between iterations.
    pub tolerance: f64,
    pub jitter: f64,
    pub max_recoveries: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            init: EmInit::KMeans,
            max_iterations: 100,
            tolerance: 1e-3,
            jitter: JITTER,
            max_recoveries: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub params: GmmParams,
    /// Data log-likelihood after each M-step.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    pub recoveries: usize,
}

/// Fits an `m`-component mixture with default [`EmOptions`].
pub fn fit_gmm<R: Rng + ?Sized>(
    samples: &[DVector<f64>],
    m: usize,
    rng: &mut R,
) -> Result<GmmParams> {
    fit_gmm_with(samples, m, &EmOptions::default(), rng).map(|f| f.params)
}

/// Runs EM from a hard assignment of samples to components.
///
/// Each round is an M-step (weighted moments under the current
/// responsibilities, plus diagonal jitter) followed by an E-step that both
/// scores the new parameters and produces the next responsibilities. With
/// `m == 1` every responsibility is exactly one, so the result coincides
/// bit-for-bit with [`super::fit_gaussian`].
pub fn fit_gmm_with<R: Rng + ?Sized>(
    samples: &[DVector<f64>],
    m: usize,
    opts: &EmOptions,
    rng: &mut R,
) -> Result<GmmFit> {
    if m == 0 {
        return Err(SmcError::InvalidConfig(
            "mixture needs at least one component".into(),
        ));
    }
    let d = check_samples(samples)?;
    let n = samples.len();
    let needed = m * (d + 1);
    if n < needed {
        return Err(SmcError::InsufficientSamples { needed, got: n });
    }

    // resp is row-major n x m.
    let mut resp = vec![0.0; n * m];
    if m == 1 {
        resp.fill(1.0);
    } else {
        let labels = match opts.init {
            EmInit::KMeans => kmeans_labels(samples, m, rng),
            EmInit::RandomAssignment => (0..n).map(|_| rng.random_range(0..m)).collect(),
        };
        for (i, k) in labels.into_iter().enumerate() {
            resp[i * m + k] = 1.0;
        }
    }

    let mut fallback_cov: Option<DMatrix<f64>> = None;
    let mut recoveries = 0;
    let mut log_likelihood = Vec::new();
    let mut converged = false;
    let mut log_p = vec![0.0; m];
    let mut scratch = DVector::zeros(d);
    let mut params;

    loop {
        // M-step.
        let mut weights = Vec::with_capacity(m);
        let mut components = Vec::with_capacity(m);
        for k in 0..m {
            let mass: f64 = (0..n).map(|i| resp[i * m + k]).sum();
            if mass < EMPTY_COMPONENT_MASS {
                recoveries += 1;
                if recoveries > opts.max_recoveries {
                    return Err(SmcError::EmptyComponent {
                        attempts: opts.max_recoveries,
                    });
                }
                log::debug!("EM component {k} is empty; re-seeding from a random sample");
                let cov = fallback_cov
                    .get_or_insert_with(|| weighted_moments(samples, |_| 1.0, opts.jitter).1)
                    .clone();
                let centre = samples[rng.random_range(0..n)].clone();
                weights.push(1.0 / m as f64);
                components.push(GaussianParams::new(centre, cov)?);
                continue;
            }
            let (mean, cov, total) = weighted_moments(samples, |i| resp[i * m + k], opts.jitter);
            weights.push(total / n as f64);
            components.push(GaussianParams::new(mean, cov)?);
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        params = GmmParams::new(weights, components)?;

        // E-step.
        let log_w: Vec<f64> = params.weights().iter().map(|w| w.ln()).collect();
        let mut ll = 0.0;
        for (i, x) in samples.iter().enumerate() {
            for k in 0..m {
                log_p[k] = log_w[k] + params.components()[k].log_pdf_with(x, &mut scratch);
            }
            let norm = log_sum_exp(&log_p);
            ll += norm;
            for k in 0..m {
                resp[i * m + k] = (log_p[k] - norm).exp();
            }
        }

        let prev = log_likelihood.last().copied();
        log_likelihood.push(ll);
        if let Some(prev) = prev {
            if ((ll - prev) / n as f64).abs() < opts.tolerance {
                converged = true;
                break;
            }
        }
        if log_likelihood.len() >= opts.max_iterations {
            break;
        }
    }

    Ok(GmmFit {
        params,
        log_likelihood,
        converged,
        recoveries,
    })
}

/// Lloyd's algorithm from k-means++ seeds; returns a label per sample.
fn kmeans_labels<R: Rng + ?Sized>(samples: &[DVector<f64>], m: usize, rng: &mut R) -> Vec<usize> {
    const MAX_LLOYD: usize = 100;
    let n = samples.len();
    let mut centres = vec![samples[rng.random_range(0..n)].clone()];
    let mut dist: Vec<f64> = samples
        .iter()
        .map(|x| (x - &centres[0]).norm_squared())
        .collect();
    while centres.len() < m {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            dist.iter()
                .position(|d| {
                    acc += d;
                    acc > u
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        centres.push(samples[next].clone());
        for (d, x) in dist.iter_mut().zip(samples) {
            *d = d.min((x - &centres[centres.len() - 1]).norm_squared());
        }
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..MAX_LLOYD {
        let mut changed = false;
        for (label, x) in labels.iter_mut().zip(samples) {
            let best = centres
                .iter()
                .map(|c| (x - c).norm_squared())
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(k, _)| k)
                .unwrap_or(0);
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (k, centre) in centres.iter_mut().enumerate() {
            let members: Vec<&DVector<f64>> = samples
                .iter()
                .zip(&labels)
                .filter(|(_, l)| **l == k)
                .map(|(x, _)| x)
                .collect();
            if members.is_empty() {
                continue;
            }
            let mut sum = DVector::zeros(centre.len());
            for x in &members {
                sum += *x;
            }
            *centre = sum / members.len() as f64;
        }
    }
    labels
}
