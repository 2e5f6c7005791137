use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{GaussianParams, GmmParams};
use crate::error::{Result, SmcError};
use crate::lkernels::LKernelStrategy;
use crate::proposal::ProposalSpec;
use crate::smc::{
    self, LogTarget, Moments, ResamplingScheme, RunFailure, RunRecord, SamplerSettings,
};

pub const BUILTIN_EXPERIMENTS: [&str; 2] = ["2d_toy", "bimodal"];
pub const DEFAULT_REPLICATES: usize = 20;
pub const DEFAULT_ESS_THRESHOLD: f64 = 0.5;

/// Covariances are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl GaussianSpec {
    pub fn build(&self) -> Result<GaussianParams> {
        GaussianParams::new(
            DVector::from_column_slice(&self.mean),
            matrix_from_rows(&self.cov, self.mean.len())?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TargetSpec {
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    Gmm {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covs: Vec<Vec<Vec<f64>>>,
    },
}

impl TargetSpec {
    pub fn build(&self) -> Result<Target> {
        match self {
            Self::Gaussian { mean, cov } => Ok(Target::Gaussian(
                GaussianSpec {
                    mean: mean.clone(),
                    cov: cov.clone(),
                }
                .build()?,
            )),
            Self::Gmm {
                weights,
                means,
                covs,
            } => {
                if means.len() != covs.len() {
                    return Err(SmcError::InvalidConfig(format!(
                        "{} component means but {} covariances",
                        means.len(),
                        covs.len()
                    )));
                }
                let components = means
                    .iter()
                    .zip(covs)
                    .map(|(m, c)| {
                        GaussianSpec {
                            mean: m.clone(),
                            cov: c.clone(),
                        }
                        .build()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Target::Mixture(GmmParams::new(
                    weights.clone(),
                    components,
                )?))
            }
        }
    }
}

/// A normalised target density with known moments.
#[derive(Debug, Clone)]
pub enum Target {
    Gaussian(GaussianParams),
    Mixture(GmmParams),
}

impl Target {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(g) => g.dim(),
            Self::Mixture(m) => m.dim(),
        }
    }

    pub fn moments(&self) -> Moments {
        match self {
            Self::Gaussian(g) => Moments {
                mean: g.mean().clone(),
                cov: g.cov().clone(),
            },
            Self::Mixture(m) => {
                let (mean, cov) = m.moments();
                Moments { mean, cov }
            }
        }
    }
}

impl LogTarget for Target {
    fn log_density(&self, x: &DVector<f64>) -> f64 {
        match self {
            Self::Gaussian(g) => g.log_pdf(x),
            Self::Mixture(m) => m.log_pdf(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub initial: GaussianSpec,
    pub random_walk_cov: Vec<Vec<f64>>,
}

impl ProposalConfig {
    pub fn build(&self) -> Result<ProposalSpec> {
        let initial = self.initial.build()?;
        let d = initial.dim();
        ProposalSpec::new(initial, matrix_from_rows(&self.random_walk_cov, d)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub target: TargetSpec,
    pub proposal: ProposalConfig,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default = "default_threshold")]
    pub ess_threshold_ratio: f64,
    pub strategy: LKernelStrategy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub resampling: ResamplingScheme,
}

fn default_threshold() -> f64 {
    DEFAULT_ESS_THRESHOLD
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

impl ExperimentConfig {
    pub fn settings(&self) -> SamplerSettings {
        SamplerSettings {
            particles: self.n,
            iterations: self.k,
            ess_threshold_ratio: self.ess_threshold_ratio,
            strategy: self.strategy,
            resampling: self.resampling,
        }
    }

    /// Checks the count invariants and that target and proposal agree on
    /// dimension.
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(SmcError::InvalidConfig(
                "replicates must be at least 1".into(),
            ));
        }
        let target = self.target.build()?;
        let proposal = self.proposal.build()?;
        if target.dim() != proposal.dim() {
            return Err(SmcError::DimensionMismatch {
                expected: target.dim(),
                got: proposal.dim(),
            });
        }
        self.settings().validate(proposal.dim())
    }

    pub fn dim(&self) -> usize {
        match &self.target {
            TargetSpec::Gaussian { mean, .. } => mean.len(),
            TargetSpec::Gmm { means, .. } => means.first().map_or(0, Vec::len),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SmcError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| SmcError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// A built-in name, or otherwise a path to a JSON config.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if BUILTIN_EXPERIMENTS.contains(&name_or_path) {
            return builtin_config(name_or_path);
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            return Self::from_json_file(path);
        }
        Err(SmcError::UnknownExperiment {
            name: name_or_path.to_string(),
            valid: BUILTIN_EXPERIMENTS.iter().map(|s| s.to_string()).collect(),
        })
    }
}

/// The two toy problems:
///
/// * `2d_toy`: target `N([3, 2], I)`, `q(x_1) = N(0, I)`, random walk with
///   covariance `I`, `N = 500`, `K = 100`.
/// * `bimodal`: target `0.5 N(-3, 1) + 0.5 N(3, 1)`, `q(x_1) = N(0, 3)`,
///   random walk with variance `0.1`, `N = 500`, `K = 1000`.
pub fn builtin_config(name: &str) -> Result<ExperimentConfig> {
    match name {
        "2d_toy" => Ok(ExperimentConfig {
            name: name.into(),
            notes: vec![
                "target N([3, 2], I); initial proposal N(0, I); random-walk covariance I".into(),
            ],
            target: TargetSpec::Gaussian {
                mean: vec![3.0, 2.0],
                cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
            proposal: ProposalConfig {
                initial: GaussianSpec {
                    mean: vec![0.0, 0.0],
                    cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                },
                random_walk_cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
            n: 500,
            k: 100,
            ess_threshold_ratio: DEFAULT_ESS_THRESHOLD,
            strategy: LKernelStrategy::GaussianOpt,
            seed: 0,
            replicates: DEFAULT_REPLICATES,
            resampling: ResamplingScheme::Multinomial,
        }),
        "bimodal" => Ok(ExperimentConfig {
            name: name.into(),
            notes: vec![
                "target 0.5 N(-3, 1) + 0.5 N(3, 1); mean 0, variance 10".into(),
                "initial proposal N(0, 3) with 3 read as a variance".into(),
                "random-walk variance 0.1".into(),
            ],
            target: TargetSpec::Gmm {
                weights: vec![0.5, 0.5],
                means: vec![vec![-3.0], vec![3.0]],
                covs: vec![vec![vec![1.0]], vec![vec![1.0]]],
            },
            proposal: ProposalConfig {
                initial: GaussianSpec {
                    mean: vec![0.0],
                    cov: vec![vec![3.0]],
                },
                random_walk_cov: vec![vec![0.1]],
            },
            n: 500,
            k: 1000,
            ess_threshold_ratio: DEFAULT_ESS_THRESHOLD,
            strategy: LKernelStrategy::GmmOpt { components: 2 },
            seed: 0,
            replicates: DEFAULT_REPLICATES,
            resampling: ResamplingScheme::Multinomial,
        }),
        other => Err(SmcError::UnknownExperiment {
            name: other.to_string(),
            valid: BUILTIN_EXPERIMENTS.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

/// Runs one sampler for `config` with the caller's rng.
pub fn run<R: rand::Rng + ?Sized>(
    config: &ExperimentConfig,
    rng: &mut R,
) -> std::result::Result<RunRecord, RunFailure> {
    let built = config
        .validate()
        .and_then(|_| Ok((config.target.build()?, config.proposal.build()?)));
    match built {
        Ok((target, proposal)) => smc::run(&target, &proposal, &config.settings(), rng),
        Err(source) => Err(RunFailure {
            record: RunRecord {
                particles: config.n,
                dim: config.dim(),
                iterations: Vec::new(),
                l_values: Vec::new(),
            },
            source,
        }),
    }
}

/// Runs one sampler seeded from `config.seed`.
pub fn run_seeded(config: &ExperimentConfig) -> std::result::Result<RunRecord, RunFailure> {
    run(config, &mut rng_for_seed(config.seed))
}

pub fn rng_for_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn matrix_from_rows(rows: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(SmcError::InvalidConfig(format!(
            "expected a {dim}x{dim} matrix as nested rows"
        )));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}
