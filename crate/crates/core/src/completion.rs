//! Map reconstruction: singular value thresholding, k-nearest-neighbour
//! interpolation, and interpolation-assisted completion.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{check_in_range, Cell, Origin, RadioMap, Sample, SampleSet};
use crate::leverage::{singular_values, sorted_svd};

/// Singular value thresholding parameters. `None` selects the usual
/// heuristics for an `N x N` problem with `|Omega|` observations:
/// `tau = 5N` and `step = 1.2 N^2 / |Omega|`.
///
/// Both are applied to the observations after dividing by their RMS value,
/// so they do not depend on the units of the map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvtParams {
    pub tau: Option<f64>,
    pub step: Option<f64>,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for SvtParams {
    fn default() -> Self {
        SvtParams {
            tau: None,
            step: None,
            max_iters: 500,
            rel_tol: 1e-4,
        }
    }
}

impl SvtParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(tau) = self.tau {
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(Error::invalid("svt.tau", "must be finite and >= 0"));
            }
        }
        if let Some(step) = self.step {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::invalid("svt.step", "must be finite and > 0"));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("svt.max_iters", "must be >= 1"));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::invalid("svt.rel_tol", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn tau_for(&self, n: usize) -> f64 {
        self.tau.unwrap_or(5.0 * n as f64)
    }

    pub fn step_for(&self, n: usize, observed: usize) -> f64 {
        self.step
            .unwrap_or(1.2 * (n * n) as f64 / observed.max(1) as f64)
    }
}

#[derive(Clone, Debug)]
pub struct CompletionResult {
    pub map: RadioMap,
    pub iterations: usize,
    /// `|P_Omega(M - X)|_F / |P_Omega(M)|_F` at the last iterate.
    pub final_residual: f64,
    pub converged: bool,
    /// Relative observed residual after each iteration.
    pub residual_trace: Vec<f64>,
    /// How often the step was halved because the residual grew by more than
    /// 5% in one iteration.
    pub step_reductions: usize,
}

/// Soft-threshold the singular values of `y` by `tau`.
fn shrink(y: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    let (u, s, v) = sorted_svd(y)?;
    let kept = s.iter().take_while(|&&v| v > tau).count();
    let mut x = DMatrix::zeros(y.nrows(), y.ncols());
    for k in 0..kept {
        let sk = s[k] - tau;
        x.ger(sk, &u.column(k), &v.column(k), 1.0);
    }
    Ok(x)
}

/// Residual growth per iteration that triggers halving the step.
const DIVERGENCE_FACTOR: f64 = 1.05;

pub fn svt_complete(samples: &SampleSet, n: usize, params: &SvtParams) -> Result<CompletionResult> {
    params.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    samples.check_bounds(n)?;
    let entries = samples.entries();
    if entries.iter().any(|s| !s.value.is_finite()) {
        return Err(Error::NonFinite("sample value"));
    }
    let scale = (entries.iter().map(|s| s.value * s.value).sum::<f64>() / entries.len() as f64).sqrt();
    if scale == 0.0 {
        return Ok(CompletionResult {
            map: RadioMap {
                values: DMatrix::zeros(n, n),
                spec: None,
            },
            iterations: 0,
            final_residual: 0.0,
            converged: true,
            residual_trace: Vec::new(),
            step_reductions: 0,
        });
    }
    let observed: Vec<(Cell, f64)> = entries.iter().map(|s| (s.cell(), s.value / scale)).collect();
    let data_norm = observed.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    let tau = params.tau_for(n);
    let mut step = params.step_for(n, observed.len());

    // Warm start: the smallest multiple k0 of step * P_Omega(M) whose
    // spectral norm exceeds tau, so the first iterate is nonzero.
    let mut y = DMatrix::zeros(n, n);
    for &(c, v) in &observed {
        y[c] = v;
    }
    let spectral = singular_values(&y)?.max();
    let k0 = (tau / (step * spectral)).ceil().max(1.0);
    y *= k0 * step;

    let mut trace = Vec::new();
    let mut x = DMatrix::zeros(n, n);
    let mut converged = false;
    let mut reductions = 0;
    for _ in 0..params.max_iters {
        x = shrink(&y, tau)?;
        let mut res_sq = 0.0;
        let residuals: Vec<(Cell, f64)> = observed
            .iter()
            .map(|&(c, v)| {
                let r = v - x[c];
                res_sq += r * r;
                (c, r)
            })
            .collect();
        let res = res_sq.sqrt() / data_norm;
        if !res.is_finite() {
            return Err(Error::NonFinite("SVT iterate"));
        }
        if let Some(&prev) = trace.last() {
            // round-off wiggles on a plateau are not divergence
            if res > prev * DIVERGENCE_FACTOR {
                step *= 0.5;
                reductions += 1;
            }
        }
        trace.push(res);
        if res < params.rel_tol {
            converged = true;
            break;
        }
        for (c, r) in residuals {
            y[c] += step * r;
        }
    }
    x *= scale;
    Ok(CompletionResult {
        map: RadioMap { values: x, spec: None },
        iterations: trace.len(),
        final_residual: trace.last().copied().unwrap_or(0.0),
        converged,
        residual_trace: trace,
        step_reductions: reductions,
    })
}

/// Mean of the `k` measured entries nearest to each target (Euclidean grid
/// distance, ties broken by row then column index).
pub fn knn_interpolate(samples: &SampleSet, targets: &[Cell], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("k", "must be >= 1"));
    }
    let mut pool: Vec<&Sample> = samples.measured().collect();
    if pool.is_empty() {
        return Err(Error::EmptySamples);
    }
    pool.sort_by_key(|s| s.cell());
    let k = k.min(pool.len());
    let mut best: Vec<(u64, usize)> = Vec::with_capacity(k + 1);
    Ok(targets
        .iter()
        .map(|&(ti, tj)| {
            best.clear();
            for (idx, s) in pool.iter().enumerate() {
                let di = s.row.abs_diff(ti) as u64;
                let dj = s.col.abs_diff(tj) as u64;
                let key = (di * di + dj * dj, idx);
                if best.len() == k && key >= best[k - 1] {
                    continue;
                }
                let pos = best.partition_point(|b| *b < key);
                best.insert(pos, key);
                best.truncate(k);
            }
            best.iter().map(|&(_, idx)| pool[idx].value).sum::<f64>() / k as f64
        })
        .collect())
}

/// Produces a full-grid estimate from scattered samples.
pub trait Interpolator: Send + Sync {
    fn interpolate(&self, samples: &SampleSet, n: usize) -> Result<DMatrix<f64>>;
}

/// K-nearest-neighbour map estimate; measured cells keep their reading.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Knn {
    pub k: usize,
}

impl Interpolator for Knn {
    fn interpolate(&self, samples: &SampleSet, n: usize) -> Result<DMatrix<f64>> {
        samples.check_bounds(n)?;
        let measured: HashSet<Cell> = samples.measured().map(Sample::cell).collect();
        let targets: Vec<Cell> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|c| !measured.contains(c))
            .collect();
        let values = knn_interpolate(samples, &targets, self.k)?;
        let mut out = DMatrix::zeros(n, n);
        for s in samples.measured() {
            out[s.cell()] = s.value;
        }
        for (c, v) in targets.into_iter().zip(values) {
            out[c] = v;
        }
        Ok(out)
    }
}

/// Add KNN pseudo-measurements at `interp_cells` (cells already measured
/// are skipped) and complete the union by SVT.
pub fn interpolation_assisted_complete(
    samples: &SampleSet,
    interp_cells: &[Cell],
    k: usize,
    n: usize,
    params: &SvtParams,
) -> Result<CompletionResult> {
    if interp_cells.is_empty() {
        return svt_complete(samples, n, params);
    }
    check_in_range(interp_cells.iter().copied(), n)?;
    let mut seen: HashSet<Cell> = samples.cells().collect();
    let targets: Vec<Cell> = interp_cells
        .iter()
        .copied()
        .filter(|c| seen.insert(*c))
        .collect();
    let values = knn_interpolate(samples, &targets, k)?;
    let mut entries = samples.entries().to_vec();
    entries.extend(targets.into_iter().zip(values).map(|((row, col), value)| Sample {
        row,
        col,
        value,
        origin: Origin::Interpolated,
    }));
    svt_complete(&SampleSet::new(entries)?, n, params)
}

/// `|estimate - truth|_F^2 / |truth|_F^2`.
pub fn nmse(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::DimensionMismatch {
            expected: truth.nrows(),
            rows: estimate.nrows(),
            cols: estimate.ncols(),
        });
    }
    let denom = truth.norm_squared();
    if denom == 0.0 {
        return Err(Error::invalid("truth", "zero matrix has no NMSE"));
    }
    Ok((estimate - truth).norm_squared() / denom)
}
