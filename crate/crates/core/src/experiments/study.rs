use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{rng_for_seed, run, ExperimentConfig};
use crate::error::Result;
use crate::lkernels::LKernelStrategy;
use crate::smc::{moment_names, moment_vector, RunRecord};

/// Which estimate a replicate contributes to the variance table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateSource {
    #[default]
    Recycled,
    FinalIteration,
}

#[derive(Debug, Clone, Default)]
pub struct StudyOptions {
    pub estimate: EstimateSource,
    /// Keep every replicate's full [`RunRecord`].
    pub keep_traces: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSummary {
    pub resample_count: usize,
    /// Moment vector of the chosen estimate (see [`moment_names`]).
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub result: std::result::Result<ReplicateSummary, String>,
    pub trace: Option<RunRecord>,
}

#[derive(Debug, Clone)]
pub struct StrategyReport {
    pub strategy: LKernelStrategy,
    pub replicates: Vec<ReplicateOutcome>,
    /// Across-replicate sample variance (denominator `R - 1`) per moment
    /// entry over the successful replicates; NaN with fewer than two.
    pub variance: Vec<f64>,
}

impl StrategyReport {
    pub fn resample_counts(&self) -> Vec<usize> {
        self.successes().map(|s| s.resample_count).collect()
    }

    pub fn successes(&self) -> impl Iterator<Item = &ReplicateSummary> {
        self.replicates
            .iter()
            .filter_map(|r| r.result.as_ref().ok())
    }

    pub fn failures(&self) -> usize {
        self.replicates.iter().filter(|r| r.result.is_err()).count()
    }
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub moment_names: Vec<String>,
    pub estimate: EstimateSource,
    pub strategies: Vec<StrategyReport>,
}

impl StudyReport {
    pub fn strategy(&self, s: LKernelStrategy) -> Option<&StrategyReport> {
        self.strategies.iter().find(|r| r.strategy == s)
    }

    pub fn failures(&self) -> usize {
        self.strategies.iter().map(StrategyReport::failures).sum()
    }
}

pub fn run_study(config: &ExperimentConfig, strategies: &[LKernelStrategy]) -> Result<StudyReport> {
    run_study_with(config, strategies, &StudyOptions::default())
}

/// Runs every strategy for `config.replicates` replicates, replicate `r`
/// seeded with `config.seed + r`. Replicates execute in parallel; results
/// are gathered in replicate order. A failed replicate is recorded, not
/// propagated.
pub fn run_study_with(
    config: &ExperimentConfig,
    strategies: &[LKernelStrategy],
    options: &StudyOptions,
) -> Result<StudyReport> {
    config.validate()?;
    for s in strategies {
        ExperimentConfig {
            strategy: *s,
            ..config.clone()
        }
        .validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..strategies.len())
        .flat_map(|s| (0..config.replicates).map(move |r| (s, r)))
        .collect();
    let outcomes: Vec<ReplicateOutcome> = jobs
        .par_iter()
        .map(|&(s, r)| run_replicate(config, strategies[s], r, options))
        .collect();

    let mut per_strategy: Vec<Vec<ReplicateOutcome>> = vec![Vec::new(); strategies.len()];
    for ((s, _), outcome) in jobs.into_iter().zip(outcomes) {
        per_strategy[s].push(outcome);
    }
    let names = moment_names(config.dim());
    let strategies = strategies
        .iter()
        .zip(per_strategy)
        .map(|(&strategy, replicates)| {
            let rows: Vec<&[f64]> = replicates
                .iter()
                .filter_map(|r| r.result.as_ref().ok())
                .map(|s| s.estimates.as_slice())
                .collect();
            StrategyReport {
                strategy,
                variance: sample_variance(&rows, names.len()),
                replicates,
            }
        })
        .collect();
    Ok(StudyReport {
        moment_names: names,
        estimate: options.estimate,
        strategies,
    })
}

pub fn replicate_seed(config: &ExperimentConfig, replicate: usize) -> u64 {
    config.seed.wrapping_add(replicate as u64)
}

fn run_replicate(
    config: &ExperimentConfig,
    strategy: LKernelStrategy,
    replicate: usize,
    options: &StudyOptions,
) -> ReplicateOutcome {
    let seed = replicate_seed(config, replicate);
    let cfg = ExperimentConfig {
        strategy,
        seed,
        ..config.clone()
    };
    match run(&cfg, &mut rng_for_seed(seed)) {
        Ok(record) => {
            let moments = match options.estimate {
                EstimateSource::Recycled => record.final_recycled(),
                EstimateSource::FinalIteration => record.final_estimate(),
            }
            .expect("a successful run has at least one iteration");
            let summary = ReplicateSummary {
                resample_count: record.resample_count(),
                estimates: moment_vector(moments),
            };
            ReplicateOutcome {
                replicate,
                seed,
                result: Ok(summary),
                trace: options.keep_traces.then_some(record),
            }
        }
        Err(failure) => {
            log::warn!("{strategy} replicate {replicate} (seed {seed}) failed: {failure}");
            ReplicateOutcome {
                replicate,
                seed,
                result: Err(failure.to_string()),
                trace: options.keep_traces.then_some(failure.record),
            }
        }
    }
}

/// Column-wise unbiased sample variance.
pub fn sample_variance(rows: &[&[f64]], width: usize) -> Vec<f64> {
    if rows.len() < 2 {
        return vec![f64::NAN; width];
    }
    let r = rows.len() as f64;
    (0..width)
        .map(|j| {
            let mean = rows.iter().map(|row| row[j]).sum::<f64>() / r;
            rows.iter().map(|row| (row[j] - mean).powi(2)).sum::<f64>() / (r - 1.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::builtin_config;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n: 60,
            k: 8,
            replicates: 3,
            ..builtin_config("2d_toy").unwrap()
        }
    }

    #[test]
    fn variance_of_identical_replicates_is_zero() {
        let rows: Vec<&[f64]> = vec![&[1.0, 2.0], &[1.0, 2.0]];
        assert_eq!(sample_variance(&rows, 2), vec![0.0, 0.0]);
        let rows: Vec<&[f64]> = vec![&[1.0], &[3.0]];
        assert_eq!(sample_variance(&rows, 1), vec![2.0]);
    }

    #[test]
    fn forced_identical_seeds_give_zero_variance() {
        // The same strategy listed twice runs replicate r with the same seed
        // in both blocks.
        let cfg = ExperimentConfig {
            replicates: 2,
            ..small_config()
        };
        let report = run_study(
            &cfg,
            &[LKernelStrategy::GaussianOpt, LKernelStrategy::GaussianOpt],
        )
        .unwrap();
        let first = |s: usize| {
            report.strategies[s].replicates[0]
                .result
                .as_ref()
                .unwrap()
                .estimates
                .clone()
        };
        let (a, b) = (first(0), first(1));
        let rows: Vec<&[f64]> = vec![&a, &b];
        assert!(sample_variance(&rows, a.len()).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn study_is_deterministic_and_ordered() {
        let cfg = small_config();
        let strategies = [
            LKernelStrategy::ForwardProposal,
            LKernelStrategy::GaussianOpt,
        ];
        let a = run_study(&cfg, &strategies).unwrap();
        let b = run_study(&cfg, &strategies).unwrap();
        assert_eq!(
            a.moment_names,
            vec!["mean_0", "mean_1", "cov_00", "cov_01", "cov_11"]
        );
        for (sa, sb) in a.strategies.iter().zip(&b.strategies) {
            assert_eq!(sa.variance, sb.variance);
            for (i, r) in sa.replicates.iter().enumerate() {
                assert_eq!(r.replicate, i);
                assert_eq!(r.seed, cfg.seed + i as u64);
            }
        }
    }

    #[test]
    fn replicate_matches_standalone_run() {
        let cfg = small_config();
        let report = run_study(&cfg, &[LKernelStrategy::GaussianOpt]).unwrap();
        let standalone = run(
            &ExperimentConfig {
                seed: cfg.seed + 2,
                ..cfg.clone()
            },
            &mut rng_for_seed(cfg.seed + 2),
        )
        .unwrap();
        let third = report.strategies[0].replicates[2].result.as_ref().unwrap();
        assert_eq!(
            third.estimates,
            moment_vector(standalone.final_recycled().unwrap())
        );
        assert_eq!(third.resample_count, standalone.resample_count());
    }

    #[test]
    fn invalid_strategy_rejected_up_front() {
        let cfg = ExperimentConfig {
            n: 6,
            ..small_config()
        };
        assert!(run_study(&cfg, &[LKernelStrategy::GmmOpt { components: 3 }]).is_err());
    }
}
