use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the sampler, the density fitters and the study runner.
#[derive(Debug, Error)]
pub enum SmcError {
    #[error("covariance is not positive definite (even after adding {jitter:e} to the diagonal)")]
    SingularCovariance { jitter: f64 },

    #[error("covariance is not symmetric: max |C - C^T| = {asymmetry:e}")]
    AsymmetricCovariance { asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid mixture weights: {0}")]
    InvalidMixtureWeights(String),

    #[error("all log-weights are -inf or NaN")]
    DegenerateWeights,

    #[error("target density is zero at every initial particle")]
    DegenerateInitialization,

    #[error("EM could not recover an empty mixture component after {attempts} re-initialisations")]
    EmptyComponent { attempts: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown experiment {name:?}; valid names are: {}", valid.join(", "))]
    UnknownExperiment { name: String, valid: Vec<String> },

    #[error("unknown L-kernel strategy {0:?}; expected forward, gauss-opt or gmm-opt:M")]
    UnknownStrategy(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = SmcError> = std::result::Result<T, E>;
