//! The sampler engine: initial importance sampling, random-walk moves with
//! an L-kernel weight update, ESS-triggered resampling and moment estimates.

mod particles;
mod sampler;

pub use particles::{
    ess, estimate_moments, resample, resample_indices, Moments, ParticleSystem, ResamplingScheme,
};
pub use sampler::{
    initialize, moment_names, moment_vector, propose, propose_and_reweight, reweight, run,
    IterationRecord, LogTarget, RunFailure, RunRecord, SamplerSettings,
};
