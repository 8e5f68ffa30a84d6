//! Benchmark result tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;

/// Version tag written in the first line of every report.
pub const REPORT_SCHEMA: &str = "radiomap-nmse-v1";

pub const ROW_HEADER: &str = "strategy,sweep_value,trial,seed,nmse,iterations,converged,truth_hash,status";
pub const SUMMARY_HEADER: &str = "strategy,sweep_value,trials,failed,mean_nmse,std_error";

#[derive(Clone, Debug, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub strategy: String,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    /// `None` when the trial failed.
    pub nmse: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub truth_hash: u64,
    pub status: RowStatus,
    pub wall_time_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub strategy: String,
    pub sweep_value: f64,
    pub trials: usize,
    pub failed: usize,
    pub mean_nmse: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NmseReport {
    pub rows: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
}

impl NmseReport {
    /// Rows are kept in (strategy, sweep value, trial) order as given;
    /// the summary follows the order of first appearance.
    pub fn new(rows: Vec<TrialRow>) -> Self {
        let summary = summarize(&rows);
        NmseReport { rows, summary }
    }

    pub fn summary_for(&self, strategy: &str, sweep_value: f64) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.strategy == strategy && s.sweep_value == sweep_value)
    }

    /// Per-trial rows followed by a blank line and the summary table.
    /// Wall time is left out so reruns produce identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# {REPORT_SCHEMA}\n{ROW_HEADER}\n");
        for r in &self.rows {
            let nmse = r.nmse.map(|v| v.to_string()).unwrap_or_default();
            let status = match &r.status {
                RowStatus::Ok => "ok".to_string(),
                RowStatus::Failed(msg) => format!("failed: {}", msg.replace([',', '\n'], ";")),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:016x},{}",
                r.strategy, r.sweep_value, r.trial, r.seed, nmse, r.iterations, r.converged, r.truth_hash, status
            );
        }
        out.push('\n');
        out.push_str(SUMMARY_HEADER);
        out.push('\n');
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.strategy, s.sweep_value, s.trials, s.failed, s.mean_nmse, s.std_error
            );
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("strategy,sweep_value,trial,wall_time_seconds\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.strategy, r.sweep_value, r.trial, r.wall_time_seconds);
        }
        out
    }

    /// Write the report to `path` and wall times to `<path>.timings.csv`.
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        std::fs::write(timings_path(path), self.timings_csv())?;
        Ok(())
    }
}

pub fn timings_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".timings.csv");
    PathBuf::from(name)
}

fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(s, v)| *s == r.strategy && *v == r.sweep_value) {
            keys.push((r.strategy.clone(), r.sweep_value));
        }
    }
    keys.into_iter()
        .map(|(strategy, sweep_value)| {
            let group: Vec<&TrialRow> = rows
                .iter()
                .filter(|r| r.strategy == strategy && r.sweep_value == sweep_value)
                .collect();
            let values: Vec<f64> = group.iter().filter_map(|r| r.nmse).collect();
            let (mean_nmse, std_error) = mean_and_se(&values);
            SummaryRow {
                strategy,
                sweep_value,
                trials: group.len(),
                failed: group.len() - values.len(),
                mean_nmse,
                std_error,
            }
        })
        .collect()
}

/// Sample mean and standard error (`sd / sqrt(n)`, unbiased `sd`). NaN mean
/// for an empty slice, zero error for a single value.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
