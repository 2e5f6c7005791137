//! Sequential Monte Carlo samplers with approximately optimal backward
//! L-kernels.
//!
//! The sampler targets `pi(x)` with a weighted particle population that is
//! moved by a Gaussian random walk. The weight update
//!
//! ```text
//! w_k = w_{k-1} * pi(x_k) / pi(x_{k-1}) * L(x_{k-1} | x_k) / q(x_k | x_{k-1})
//! ```
//!
//! depends on the choice of backward kernel `L`. Besides the usual choice
//! `L = q` (the forward proposal run in reverse), this crate approximates the
//! variance-minimising kernel, the conditional `q(x_{k-1} | x_k)` of the
//! joint proposal distribution, by fitting a Gaussian or a Gaussian mixture
//! to the `(x_{k-1}, x_k)` pairs of each iteration and conditioning it.
//!
//! ```no_run
//! use smc_optl::experiments::{builtin_config, run_seeded};
//!
//! let config = builtin_config("2d_toy").unwrap();
//! let record = run_seeded(&config).unwrap();
//! println!("resampled {} times", record.resample_count());
//! ```

pub mod distributions;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod lkernels;
pub mod math;
pub mod proposal;
pub mod recycling;
pub mod report;
pub mod smc;

pub use distributions::{GaussianParams, GmmParams, JointBlocks};
pub use error::{Result, SmcError};
pub use experiments::{builtin_config, run_study, ExperimentConfig, StudyReport};
pub use lkernels::{FittedLKernel, LKernelStrategy};
pub use proposal::ProposalSpec;
pub use recycling::RecyclingState;
pub use smc::{
    LogTarget, Moments, ParticleSystem, ResamplingScheme, RunFailure, RunRecord, SamplerSettings,
};
