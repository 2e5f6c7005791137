use nalgebra::DVector;
use rand::Rng;
use thiserror::Error;

use super::particles::{
    ess, estimate_moments, resample, Moments, ParticleSystem, ResamplingScheme,
};
use crate::distributions::{GaussianParams, GmmParams};
use crate::error::{Result, SmcError};
use crate::lkernels::{FittedLKernel, LKernelStrategy};
use crate::proposal::ProposalSpec;
use crate::recycling::{optimal_constants, RecyclingState};

/// Unnormalised log target density `ln pi*(x)`; `-inf` outside the support.
pub trait LogTarget: Sync {
    fn log_density(&self, x: &DVector<f64>) -> f64;
}

impl LogTarget for GaussianParams {
    fn log_density(&self, x: &DVector<f64>) -> f64 {
        self.log_pdf(x)
    }
}

impl LogTarget for GmmParams {
    fn log_density(&self, x: &DVector<f64>) -> f64 {
        self.log_pdf(x)
    }
}

impl<F> LogTarget for F
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    fn log_density(&self, x: &DVector<f64>) -> f64 {
        self(x)
    }
}

/// Draws `N` particles from `q(x_1)` and weights them by `pi*/q`.
pub fn initialize<T, R>(
    target: &T,
    proposal: &ProposalSpec,
    n: usize,
    rng: &mut R,
) -> Result<ParticleSystem>
where
    T: LogTarget + ?Sized,
    R: Rng + ?Sized,
{
    if n < 2 {
        return Err(SmcError::InvalidConfig(format!(
            "need at least 2 particles, got {n}"
        )));
    }
    let q = proposal.initial();
    let curr: Vec<_> = (0..n).map(|_| q.sample(rng)).collect();
    let log_w: Vec<f64> = curr
        .iter()
        .map(|x| sanitize(target.log_density(x) - q.log_pdf(x)))
        .collect();
    if log_w.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(SmcError::DegenerateInitialization);
    }
    Ok(ParticleSystem {
        prev: curr.clone(),
        curr,
        log_w,
        iteration: 1,
    })
}

/// One random-walk move per particle.
pub fn propose<R: Rng + ?Sized>(
    ps: &ParticleSystem,
    proposal: &ProposalSpec,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    ps.curr.iter().map(|x| proposal.propose(x, rng)).collect()
}

/// Moves the system to `proposed` and applies
/// `ln w_k = ln w_{k-1} + ln pi*(x_k) - ln pi*(x_{k-1}) + ln L(x_{k-1}|x_k) - ln q(x_k|x_{k-1})`.
/// Particles already at `-inf` stay there.
pub fn reweight<T: LogTarget + ?Sized>(
    ps: &ParticleSystem,
    proposed: Vec<DVector<f64>>,
    kernel: &FittedLKernel,
    proposal: &ProposalSpec,
    target: &T,
) -> Result<ParticleSystem> {
    if proposed.len() != ps.len() {
        return Err(SmcError::DimensionMismatch {
            expected: ps.len(),
            got: proposed.len(),
        });
    }
    let log_w: Vec<f64> = ps
        .log_w
        .iter()
        .zip(&ps.curr)
        .zip(&proposed)
        .map(|((&lw, old), new)| {
            if lw == f64::NEG_INFINITY {
                return lw;
            }
            let log_ratio = target.log_density(new) - target.log_density(old);
            let log_kernel =
                kernel.log_density(proposal, old, new) - proposal.log_transition(new, old);
            sanitize(lw + log_ratio + log_kernel)
        })
        .collect();
    if log_w.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(SmcError::DegenerateWeights);
    }
    Ok(ParticleSystem {
        prev: ps.curr.clone(),
        curr: proposed,
        log_w,
        iteration: ps.iteration + 1,
    })
}

/// Propose, fit the L-kernel on `(curr, proposed)` pairs, reweight.
pub fn propose_and_reweight<T, R>(
    ps: &ParticleSystem,
    proposal: &ProposalSpec,
    strategy: LKernelStrategy,
    target: &T,
    rng: &mut R,
) -> Result<ParticleSystem>
where
    T: LogTarget + ?Sized,
    R: Rng + ?Sized,
{
    let proposed = propose(ps, proposal, rng);
    let kernel = FittedLKernel::fit(strategy, &ps.curr, &proposed, rng)?;
    reweight(ps, proposed, &kernel, proposal, target)
}

// NaN (e.g. inf - inf from an underflowing kernel) counts as zero weight.
fn sanitize(lw: f64) -> f64 {
    if lw.is_nan() {
        log::debug!("NaN log-weight replaced by -inf");
        return f64::NEG_INFINITY;
    }
    lw
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSettings {
    pub particles: usize,
    pub iterations: usize,
    pub ess_threshold_ratio: f64,
    pub strategy: LKernelStrategy,
    pub resampling: ResamplingScheme,
}

impl SamplerSettings {
    pub fn new(particles: usize, iterations: usize, strategy: LKernelStrategy) -> Self {
        Self {
            particles,
            iterations,
            ess_threshold_ratio: 0.5,
            strategy,
            resampling: ResamplingScheme::Multinomial,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.particles < 2 {
            return Err(SmcError::InvalidConfig(format!(
                "N must be at least 2, got {}",
                self.particles
            )));
        }
        if self.iterations < 1 {
            return Err(SmcError::InvalidConfig("K must be at least 1".into()));
        }
        if !(self.ess_threshold_ratio > 0.0 && self.ess_threshold_ratio <= 1.0) {
            return Err(SmcError::InvalidConfig(format!(
                "ESS threshold ratio must lie in (0, 1], got {}",
                self.ess_threshold_ratio
            )));
        }
        let needed = self.strategy.min_particles(dim);
        if self.particles < needed {
            return Err(SmcError::InsufficientSamples {
                needed,
                got: self.particles,
            });
        }
        Ok(())
    }
}

/// Diagnostics and estimates for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub ess: f64,
    /// Whether the population was resampled before this iteration's move.
    pub resampled: bool,
    pub estimate: Moments,
    pub recycled: Moments,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub particles: usize,
    pub dim: usize,
    pub iterations: Vec<IterationRecord>,
    /// `l_k` per iteration, as used for the recycling constants.
    pub l_values: Vec<f64>,
}

impl RunRecord {
    fn empty(particles: usize, dim: usize) -> Self {
        Self {
            particles,
            dim,
            iterations: Vec::new(),
            l_values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn resample_count(&self) -> usize {
        self.iterations.iter().filter(|r| r.resampled).count()
    }

    /// Recycling constants in force after iteration `k` (1-based).
    pub fn recycling_constants(&self, k: usize) -> Vec<f64> {
        optimal_constants(&self.l_values[..k])
    }

    pub fn final_recycled(&self) -> Option<&Moments> {
        self.iterations.last().map(|r| &r.recycled)
    }

    pub fn final_estimate(&self) -> Option<&Moments> {
        self.iterations.last().map(|r| &r.estimate)
    }
}

/// A run that stopped early; `record` holds the completed iterations.
#[derive(Debug, Error)]
#[error("run aborted after {} completed iterations: {source}", record.len())]
pub struct RunFailure {
    pub record: RunRecord,
    #[source]
    pub source: SmcError,
}

/// Full sampler: initialise, then for `k = 2..=K` resample if
/// `ESS/N < threshold`, move and reweight; each iteration is estimated and
/// fed to the recycling state.
pub fn run<T, R>(
    target: &T,
    proposal: &ProposalSpec,
    settings: &SamplerSettings,
    rng: &mut R,
) -> std::result::Result<RunRecord, RunFailure>
where
    T: LogTarget + ?Sized,
    R: Rng + ?Sized,
{
    let dim = proposal.dim();
    let mut record = RunRecord::empty(settings.particles, dim);
    let mut recycling = RecyclingState::new();
    match run_into(target, proposal, settings, rng, &mut record, &mut recycling) {
        Ok(()) => Ok(record),
        Err(source) => Err(RunFailure { record, source }),
    }
}

fn run_into<T, R>(
    target: &T,
    proposal: &ProposalSpec,
    settings: &SamplerSettings,
    rng: &mut R,
    record: &mut RunRecord,
    recycling: &mut RecyclingState,
) -> Result<()>
where
    T: LogTarget + ?Sized,
    R: Rng + ?Sized,
{
    settings.validate(proposal.dim())?;
    let n = settings.particles as f64;
    let mut ps = initialize(target, proposal, settings.particles, rng)?;
    push_iteration(&ps, false, recycling, record)?;
    for _ in 2..=settings.iterations {
        let resampled = ps.ess()? / n < settings.ess_threshold_ratio;
        if resampled {
            ps = resample(&ps, settings.resampling, rng)?;
        }
        ps = propose_and_reweight(&ps, proposal, settings.strategy, target, rng)?;
        push_iteration(&ps, resampled, recycling, record)?;
    }
    Ok(())
}

fn push_iteration(
    ps: &ParticleSystem,
    resampled: bool,
    recycling: &mut RecyclingState,
    record: &mut RunRecord,
) -> Result<()> {
    let ess = ess(&ps.log_w)?;
    let estimate = estimate_moments(ps)?;
    recycling.push(ess, &estimate);
    let recycled = recycling.recycled_estimate()?;
    record.l_values.push(ess);
    record.iterations.push(IterationRecord {
        iteration: ps.iteration,
        ess,
        resampled,
        estimate,
        recycled,
    });
    Ok(())
}

/// Flattened `[mean_0.., cov_ij for i <= j]`, the moment entries compared
/// across replicates.
pub fn moment_vector(m: &Moments) -> Vec<f64> {
    let d = m.mean.len();
    let mut v: Vec<f64> = m.mean.iter().copied().collect();
    for i in 0..d {
        for j in i..d {
            v.push(m.cov[(i, j)]);
        }
    }
    v
}

pub fn moment_names(dim: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..dim).map(|i| format!("mean_{i}")).collect();
    for i in 0..dim {
        for j in i..dim {
            names.push(format!("cov_{i}{j}"));
        }
    }
    names
}
