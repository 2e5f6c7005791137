//! CSV and JSON emission for run traces and study tables.
//!
//! Every float is written as `{:.16e}` (17 significant digits), so output is
//! byte-stable for identical inputs and parses back to the same `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Result, SmcError};
use crate::experiments::{ExperimentConfig, StudyReport};
use crate::smc::{moment_vector, RunRecord};

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_header(dim: usize) -> Vec<String> {
    let mut h = vec!["iteration".to_string(), "ess".into(), "resampled".into()];
    let square = |prefix: &str| {
        (0..dim)
            .flat_map(move |i| (0..dim).map(move |j| format!("{prefix}_{i}{j}")))
            .collect::<Vec<_>>()
    };
    h.extend((0..dim).map(|i| format!("mean_{i}")));
    h.extend(square("cov"));
    h.extend((0..dim).map(|i| format!("recycled_mean_{i}")));
    h.extend(square("recycled_cov"));
    h
}

/// `iteration, ess, resampled, mean_*, cov_*, recycled_mean_*, recycled_cov_*`
/// with covariances flattened row-major.
pub fn write_trace<W: Write>(record: &RunRecord, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(record.dim))?;
    for it in &record.iterations {
        let mut row = vec![
            it.iteration.to_string(),
            format_f64(it.ess),
            u8::from(it.resampled).to_string(),
        ];
        row.extend(it.estimate.mean.iter().map(|v| format_f64(*v)));
        row.extend(it.estimate.cov.transpose().iter().map(|v| format_f64(*v)));
        row.extend(it.recycled.mean.iter().map(|v| format_f64(*v)));
        row.extend(it.recycled.cov.transpose().iter().map(|v| format_f64(*v)));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn study_header(report: &StudyReport) -> Vec<String> {
    let mut h: Vec<String> = ["strategy", "replicate", "seed", "resample_count"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(report.moment_names.iter().map(|m| format!("final_{m}")));
    h
}

/// One row per strategy x replicate, then per strategy a row with
/// `replicate = variance` holding the across-replicate sample variance of
/// each `final_<moment>` column. Failed replicates leave their numeric
/// fields empty.
pub fn write_study<W: Write>(report: &StudyReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(study_header(report))?;
    for s in &report.strategies {
        for r in &s.replicates {
            let mut row = vec![
                s.strategy.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
            ];
            match &r.result {
                Ok(summary) => {
                    row.push(summary.resample_count.to_string());
                    row.extend(summary.estimates.iter().map(|v| format_f64(*v)));
                }
                Err(_) => row.extend(std::iter::repeat_n(
                    String::new(),
                    report.moment_names.len() + 1,
                )),
            }
            w.write_record(row)?;
        }
    }
    for s in &report.strategies {
        let mut row = vec![
            s.strategy.to_string(),
            "variance".into(),
            String::new(),
            String::new(),
        ];
        row.extend(s.variance.iter().map(|v| format_f64(*v)));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_trace_csv(record: &RunRecord, path: &Path) -> Result<()> {
    let file = create(path)?;
    write_trace(record, BufWriter::new(file)).map_err(|source| csv_error(path, source))
}

pub fn emit_study_csv(report: &StudyReport, path: &Path) -> Result<()> {
    let file = create(path)?;
    write_study(report, BufWriter::new(file)).map_err(|source| csv_error(path, source))
}

/// Pretty-printed config echo.
pub fn emit_config_json(config: &ExperimentConfig, path: &Path) -> Result<()> {
    let file = create(path)?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, config).map_err(|source| SmcError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|source| io_error(path, source))
}

/// Moment vector of the final recycled estimate, labelled for printing.
pub fn summarize(record: &RunRecord) -> Vec<(String, f64)> {
    let names = crate::smc::moment_names(record.dim);
    record
        .final_recycled()
        .map(|m| names.into_iter().zip(moment_vector(m)).collect())
        .unwrap_or_default()
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| io_error(path, source))
}

fn io_error(path: &Path, source: std::io::Error) -> SmcError {
    SmcError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_error(path: &Path, source: csv::Error) -> SmcError {
    SmcError::Csv {
        path: path.to_path_buf(),
        source,
    }
}
