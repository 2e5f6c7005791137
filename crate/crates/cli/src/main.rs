use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smc_optl::experiments::{
    run_study_with, EstimateSource, ExperimentConfig, StudyOptions, StudyReport,
};
use smc_optl::report::{emit_config_json, emit_study_csv, emit_trace_csv};
use smc_optl::smc::ResamplingScheme;
use smc_optl::LKernelStrategy;

#[derive(Parser, Debug)]
#[command(
    name = "smc-optl",
    version,
    about = "SMC samplers with approximately optimal L-kernels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one strategy for one or more seeds and write per-iteration traces.
    Run {
        #[command(flatten)]
        common: Common,
        /// forward | gauss-opt | gmm-opt:M
        #[arg(long)]
        strategy: Option<LKernelStrategy>,
    },
    /// Run several strategies over many seeds and write the variance table.
    Study {
        #[command(flatten)]
        common: Common,
        /// Comma-separated strategies; defaults depend on the experiment.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<LKernelStrategy>,
        /// Tabulate final-iteration estimates instead of recycled ones.
        #[arg(long)]
        final_iteration: bool,
    },
    /// Print a built-in experiment's config as JSON.
    Config {
        /// 2d_toy | bimodal
        name: String,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Built-in experiment name (2d_toy, bimodal) or path to a config JSON.
    #[arg(long)]
    experiment: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long = "ess-threshold")]
    ess_threshold: Option<f64>,
    #[arg(long, value_parser = parse_scheme)]
    resampling: Option<ResamplingScheme>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

fn parse_scheme(s: &str) -> Result<ResamplingScheme, String> {
    match s {
        "multinomial" => Ok(ResamplingScheme::Multinomial),
        "systematic" => Ok(ResamplingScheme::Systematic),
        _ => Err(format!("unknown resampling scheme {s:?}")),
    }
}

impl Common {
    fn config(&self) -> smc_optl::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.experiment)?;
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(r) = self.replicates {
            cfg.replicates = r;
        }
        if let Some(t) = self.ess_threshold {
            cfg.ess_threshold_ratio = t;
        }
        if let Some(s) = self.resampling {
            cfg.resampling = s;
        }
        Ok(cfg)
    }
}

fn default_strategies(cfg: &ExperimentConfig) -> Vec<LKernelStrategy> {
    match cfg.name.as_str() {
        "2d_toy" => vec![
            LKernelStrategy::ForwardProposal,
            LKernelStrategy::GaussianOpt,
        ],
        "bimodal" => vec![
            LKernelStrategy::ForwardProposal,
            LKernelStrategy::GmmOpt { components: 1 },
            LKernelStrategy::GmmOpt { components: 2 },
        ],
        _ if cfg.strategy == LKernelStrategy::ForwardProposal => vec![cfg.strategy],
        _ => vec![LKernelStrategy::ForwardProposal, cfg.strategy],
    }
}

fn file_tag(s: LKernelStrategy) -> String {
    s.to_string().replace(':', "-")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("{failures} replicate(s) failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> smc_optl::Result<usize> {
    match cli.command {
        Command::Config { name } => {
            let cfg = smc_optl::builtin_config(&name)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&cfg).expect("config serialises")
            );
            Ok(0)
        }
        Command::Run { common, strategy } => {
            let mut cfg = common.config()?;
            if let Some(s) = strategy {
                cfg.strategy = s;
            }
            let options = StudyOptions {
                estimate: EstimateSource::Recycled,
                keep_traces: true,
            };
            let report = run_study_with(&cfg, &[cfg.strategy], &options)?;
            prepare_out(&common.out, &cfg)?;
            for r in &report.strategies[0].replicates {
                let name = if r.replicate == 0 {
                    "trace.csv".to_string()
                } else {
                    format!("trace_r{}.csv", r.replicate)
                };
                if let Some(trace) = &r.trace {
                    emit_trace_csv(trace, &common.out.join(name))?;
                }
                if let Err(e) = &r.result {
                    eprintln!("replicate {} (seed {}): {e}", r.replicate, r.seed);
                }
            }
            if cfg.replicates >= 2 {
                emit_study_csv(&report, &common.out.join("study.csv"))?;
            }
            print_report(&report);
            Ok(report.failures())
        }
        Command::Study {
            common,
            strategies,
            final_iteration,
        } => {
            let cfg = common.config()?;
            let strategies = if strategies.is_empty() {
                default_strategies(&cfg)
            } else {
                strategies
            };
            let options = StudyOptions {
                estimate: if final_iteration {
                    EstimateSource::FinalIteration
                } else {
                    EstimateSource::Recycled
                },
                keep_traces: true,
            };
            let report = run_study_with(&cfg, &strategies, &options)?;
            prepare_out(&common.out, &cfg)?;
            emit_study_csv(&report, &common.out.join("study.csv"))?;
            for s in &report.strategies {
                if let Some(trace) = s.replicates.first().and_then(|r| r.trace.as_ref()) {
                    let path = common
                        .out
                        .join(format!("trace_{}.csv", file_tag(s.strategy)));
                    emit_trace_csv(trace, &path)?;
                }
                for r in s.replicates.iter().filter(|r| r.result.is_err()) {
                    if let Err(e) = &r.result {
                        eprintln!(
                            "{} replicate {} (seed {}): {e}",
                            s.strategy, r.replicate, r.seed
                        );
                    }
                }
            }
            print_report(&report);
            Ok(report.failures())
        }
    }
}

fn prepare_out(dir: &Path, cfg: &ExperimentConfig) -> smc_optl::Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| smc_optl::SmcError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    emit_config_json(cfg, &dir.join("config.json"))
}

fn print_report(report: &StudyReport) {
    println!("{:<12} {:>9} {:>9}", "strategy", "ok", "resamples");
    for s in &report.strategies {
        let counts = s.resample_counts();
        let mean = counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64;
        println!(
            "{:<12} {:>9} {:>9.1}",
            s.strategy.to_string(),
            format!("{}/{}", counts.len(), s.replicates.len()),
            mean
        );
    }
    println!();
    print!("{:<12}", "variance");
    for name in &report.moment_names {
        print!(" {name:>12}");
    }
    println!();
    for s in &report.strategies {
        print!("{:<12}", s.strategy.to_string());
        for v in &s.variance {
            print!(" {v:>12.4e}");
        }
        println!();
    }
}
