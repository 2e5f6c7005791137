//! Built-in toy problems, config-driven runs and multi-seed studies.

mod config;
mod study;

pub use config::{
    builtin_config, rng_for_seed, run, run_seeded, ExperimentConfig, GaussianSpec, ProposalConfig,
    Target, TargetSpec, BUILTIN_EXPERIMENTS, DEFAULT_ESS_THRESHOLD, DEFAULT_REPLICATES,
};
pub use study::{
    replicate_seed, run_study, run_study_with, sample_variance, EstimateSource, ReplicateOutcome,
    ReplicateSummary, StrategyReport, StudyOptions, StudyReport,
};
