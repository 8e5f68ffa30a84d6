//! CSV export of the leverage-probability limit traces.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{TheoryConfig, TheoryKind};
use crate::error::Result;
use crate::theory::{consistency_trace, pseudo_image_trace, RatioTrace, RegionKind};

pub const TRACE_HEADER: &str = "kind,parameter,ratio,deviation,reference,clip_active";

pub fn traces(config: &TheoryConfig) -> Result<Vec<RatioTrace>> {
    let mut out = Vec::new();
    if matches!(config.kind, TheoryKind::PseudoImage | TheoryKind::Both) {
        out.push(pseudo_image_trace(
            config.grid_side,
            config.offset,
            config.delta,
            &config.betas,
            config.alpha,
            config.c,
        )?);
    }
    if matches!(config.kind, TheoryKind::Consistency | TheoryKind::Both) {
        out.push(consistency_trace(
            config.grid_side,
            config.offset,
            config.beta,
            &config.deltas,
            config.alpha,
            config.c,
        )?);
    }
    Ok(out)
}

pub fn trace_file_name(kind: RegionKind) -> &'static str {
    match kind {
        RegionKind::PseudoImage => "pseudo_image.csv",
        RegionKind::Source => "consistency.csv",
    }
}

pub fn trace_csv(trace: &RatioTrace) -> String {
    let kind = match trace.kind {
        RegionKind::PseudoImage => "pseudo_image",
        RegionKind::Source => "consistency",
    };
    let mut out = format!("{TRACE_HEADER}\n");
    for (idx, param) in trace.parameter_values.iter().enumerate() {
        let deviation = trace.deviations.get(idx).map(f64::to_string).unwrap_or_default();
        let reference = trace.reference.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{kind},{param},{},{deviation},{reference},{}",
            trace.ratios[idx], trace.clip_active[idx]
        );
    }
    out
}

/// Compute the configured traces and write one CSV per trace into `dir`.
pub fn run_theory(config: &TheoryConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let traces = traces(config)?;
    std::fs::create_dir_all(dir)?;
    traces
        .iter()
        .map(|t| {
            let path = dir.join(trace_file_name(t.kind));
            std::fs::write(&path, trace_csv(t))?;
            Ok(path)
        })
        .collect()
}
