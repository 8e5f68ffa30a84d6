//! Plain-text file formats.
//!
//! Matrices: a `# N=<side>` comment line followed by `N` comma-separated
//! rows. Sample sets: a `row,col,value,origin` header followed by one entry
//! per line, zero-based indices. Floats are written in Rust's shortest
//! round-trip form, so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{Origin, Sample, SampleSet};

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("# N={}\n", m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Format {
        line: 1,
        reason: "empty matrix file".into(),
    })?;
    let n: usize = header
        .trim()
        .strip_prefix("# N=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or(Error::Format {
            line: 1,
            reason: "expected `# N=<side>` header".into(),
        })?;
    let mut values = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (idx, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        if row.len() != n {
            return Err(Error::Format {
                line: idx + 1,
                reason: format!("expected {n} values, found {}", row.len()),
            });
        }
        values.extend(row);
        rows += 1;
    }
    if rows != n {
        return Err(Error::Format {
            line: rows + 1,
            reason: format!("expected {n} rows, found {rows}"),
        });
    }
    Ok(DMatrix::from_row_slice(n, n, &values))
}

pub fn format_samples(samples: &SampleSet) -> String {
    let mut out = String::from("row,col,value,origin\n");
    for s in samples.entries() {
        let _ = writeln!(out, "{},{},{},{}", s.row, s.col, s.value, s.origin.as_str());
    }
    out
}

pub fn parse_samples(text: &str) -> Result<SampleSet> {
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line.starts_with("row")) {
            continue;
        }
        let bad = |reason: String| Error::Format {
            line: idx + 1,
            reason,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        }
        let row = fields[0].parse().map_err(|e| bad(format!("row: {e}")))?;
        let col = fields[1].parse().map_err(|e| bad(format!("col: {e}")))?;
        let value = fields[2].parse().map_err(|e| bad(format!("value: {e}")))?;
        let origin = match fields[3] {
            "measured" => Origin::Measured,
            "interpolated" => Origin::Interpolated,
            other => return Err(bad(format!("unknown origin `{other}`"))),
        };
        entries.push(Sample {
            row,
            col,
            value,
            origin,
        });
    }
    SampleSet::new(entries)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    Ok(std::fs::write(path, format_matrix(m))?)
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    parse_samples(&std::fs::read_to_string(path)?)
}

pub fn write_samples(path: &Path, samples: &SampleSet) -> Result<()> {
    Ok(std::fs::write(path, format_samples(samples))?)
}
