//! Numerical checks of how leverage probabilities relate to the field on
//! the two-source Gaussian construction of [`gaussian_pair_field`].
//!
//! * Pseudo-image region `I(L1, delta)`: rows `L1 - delta ..= L1 + delta`,
//!   columns `0 ..= delta`. The field vanishes there much faster than the
//!   leverage probability as `beta` grows.
//! * Source region `J(L1, delta)`: rows and columns `L1 - delta ..= L1 + delta`,
//!   around the second source, where `H / p` approaches a constant.
//!
//! Probabilities use exact rank-2 SVD leverage scores and the unclipped
//! leverage expression; ratios are formed in log space.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{gaussian_pair_field, gaussian_pair_profiles};
use crate::leverage::{leverage_scores, truncated_svd, LeverageScores};

/// Smallest reported ratio.
pub const RATIO_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionKind {
    PseudoImage,
    Source,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub offset: usize,
    pub delta: usize,
}

impl RegionSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.offset + self.delta >= n || self.delta > self.offset {
            return Err(Error::invalid("delta", "region leaves the grid"));
        }
        if self.kind == RegionKind::PseudoImage && 2 * self.delta >= self.offset {
            return Err(Error::invalid(
                "delta",
                format!("pseudo-image region needs delta < L1/2 (delta={}, L1={})", self.delta, self.offset),
            ));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<(usize, usize)> {
        let rows = self.offset - self.delta..=self.offset + self.delta;
        let cols = match self.kind {
            RegionKind::PseudoImage => 0..=self.delta,
            RegionKind::Source => self.offset - self.delta..=self.offset + self.delta,
        };
        rows.flat_map(|i| cols.clone().map(move |j| (i, j))).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioTrace {
    pub kind: RegionKind,
    /// `beta` values for pseudo-image traces, `delta` values for source
    /// traces.
    pub parameter_values: Vec<f64>,
    /// Max of `H/p` over `I`, or `H/p` at the centre cell of `J`.
    pub ratios: Vec<f64>,
    /// Worst-case `|H/p - C'/C| / (C'/C)` over `J`; empty for `I`.
    pub deviations: Vec<f64>,
    /// `C'/C` with `C' = alpha / (4 log^2(2N))`; set for source traces.
    pub reference: Option<f64>,
    /// Whether any unclipped `p_ij` exceeded 1, i.e. whether the `min{., 1}`
    /// clip would have changed the probabilities.
    pub clip_active: Vec<bool>,
}

struct PairEvaluation {
    n: usize,
    offset: usize,
    beta: f64,
    alpha: f64,
    scores: LeverageScores,
    log_scale: f64,
    max_unclipped: f64,
}

impl PairEvaluation {
    fn new(n: usize, offset: usize, beta: f64, alpha: f64, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid("C", "must be finite and > 0"));
        }
        let h = gaussian_pair_field(offset, beta, alpha, n)?;
        let scores = leverage_scores(&truncated_svd(&h.values, 2)?)?;
        let scale = c * scores.rank as f64 * (2.0 * n as f64).ln().powi(2) / n as f64;
        let max_raw = scores.mu.max() + scores.nu.max();
        Ok(PairEvaluation {
            n,
            offset,
            beta,
            alpha,
            scores,
            log_scale: scale.ln(),
            max_unclipped: scale * max_raw,
        })
    }

    fn log_h(&self, i: usize, j: usize) -> f64 {
        let l1 = self.offset as f64;
        let (x, y) = (i as f64, j as f64);
        let a = -self.beta * (x * x + y * y);
        let b = -self.beta * ((x - l1).powi(2) + (y - l1).powi(2));
        let m = a.max(b);
        self.alpha.ln() + m + ((a - m).exp() + (b - m).exp()).ln()
    }

    fn log_p(&self, i: usize, j: usize) -> f64 {
        self.log_scale + (self.scores.mu[i] + self.scores.nu[j]).ln()
    }

    fn ratio(&self, i: usize, j: usize) -> f64 {
        (self.log_h(i, j) - self.log_p(i, j)).exp().max(RATIO_FLOOR)
    }

    fn clip_active(&self) -> bool {
        self.max_unclipped > 1.0
    }

    fn reference(&self, c: f64) -> f64 {
        self.alpha / (4.0 * (2.0 * self.n as f64).ln().powi(2)) / c
    }
}

pub fn pseudo_image_trace(
    n: usize,
    offset: usize,
    delta: usize,
    betas: &[f64],
    alpha: f64,
    c: f64,
) -> Result<RatioTrace> {
    let region = RegionSpec {
        kind: RegionKind::PseudoImage,
        offset,
        delta,
    };
    region.validate(n)?;
    if betas.is_empty() || betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::invalid("betas", "need positive beta values"));
    }
    if betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("betas", "must be strictly increasing"));
    }
    let cells = region.cells();
    let mut trace = RatioTrace {
        kind: RegionKind::PseudoImage,
        parameter_values: betas.to_vec(),
        ratios: Vec::new(),
        deviations: Vec::new(),
        reference: None,
        clip_active: Vec::new(),
    };
    for &beta in betas {
        let eval = PairEvaluation::new(n, offset, beta, alpha, c)?;
        let worst = cells
            .iter()
            .map(|&(i, j)| eval.ratio(i, j))
            .fold(RATIO_FLOOR, f64::max);
        trace.ratios.push(worst);
        trace.clip_active.push(eval.clip_active());
    }
    Ok(trace)
}

/// `H/p` at the second source, cell `(L1, L1)`.
pub fn source_center_ratio(n: usize, offset: usize, beta: f64, alpha: f64, c: f64) -> Result<f64> {
    let eval = PairEvaluation::new(n, offset, beta, alpha, c)?;
    Ok(eval.ratio(offset, offset))
}

pub fn consistency_trace(
    n: usize,
    offset: usize,
    beta: f64,
    deltas: &[usize],
    alpha: f64,
    c: f64,
) -> Result<RatioTrace> {
    if deltas.is_empty() || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("deltas", "must be strictly decreasing"));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid("beta", "must be finite and > 0"));
    }
    if (offset as f64) * beta.sqrt() < 4.0 {
        return Err(Error::invalid(
            "offset",
            "need L1 * sqrt(beta) >= 4 so the sources do not overlap",
        ));
    }
    for &delta in deltas {
        RegionSpec {
            kind: RegionKind::Source,
            offset,
            delta,
        }
        .validate(n)?;
    }
    let eval = PairEvaluation::new(n, offset, beta, alpha, c)?;
    let reference = eval.reference(c);
    let mut trace = RatioTrace {
        kind: RegionKind::Source,
        parameter_values: deltas.iter().map(|&d| d as f64).collect(),
        ratios: Vec::new(),
        deviations: Vec::new(),
        reference: Some(reference),
        clip_active: Vec::new(),
    };
    for &delta in deltas {
        let region = RegionSpec {
            kind: RegionKind::Source,
            offset,
            delta,
        };
        let worst = region
            .cells()
            .iter()
            .map(|&(i, j)| (eval.ratio(i, j) - reference).abs() / reference)
            .fold(0.0, f64::max);
        trace.ratios.push(eval.ratio(offset, offset));
        trace.deviations.push(worst);
        trace.clip_active.push(eval.clip_active());
    }
    Ok(trace)
}

/// Leverage probability of the two-source construction from per-axis
/// profiles, assuming the profiles are orthogonal (negligible overlap):
/// `C log^2(2N) * sum_k (u_k(i)^2 / |u_k|^2 + u_k(j)^2 / |u_k|^2)`.
pub fn separated_sources_probability(n: usize, offset: usize, beta: f64, c: f64) -> DMatrix<f64> {
    let (u1, u2) = gaussian_pair_profiles(offset, beta, n);
    let (n1, n2) = (u1.norm_squared(), u2.norm_squared());
    let log2 = (2.0 * n as f64).ln().powi(2);
    let axis = |i: usize| u1[i] * u1[i] / n1 + u2[i] * u2[i] / n2;
    DMatrix::from_fn(n, n, |i, j| c * log2 * (axis(i) + axis(j)))
}

/// The same quantity without profile normalisation:
/// `2C log^2(2N) (u_1(i)^2 + u_2(i)^2 + u_1(j)^2 + u_2(j)^2)`.
pub fn unnormalized_pair_probability(n: usize, offset: usize, beta: f64, c: f64) -> DMatrix<f64> {
    let (u1, u2) = gaussian_pair_profiles(offset, beta, n);
    let log2 = (2.0 * n as f64).ln().powi(2);
    let axis = |i: usize| u1[i] * u1[i] + u2[i] * u2[i];
    DMatrix::from_fn(n, n, |i, j| 2.0 * c * log2 * (axis(i) + axis(j)))
}

/// Exact unclipped leverage expression of the two-source construction.
pub fn exact_pair_probability(n: usize, offset: usize, beta: f64, c: f64) -> Result<DMatrix<f64>> {
    let eval = PairEvaluation::new(n, offset, beta, 1.0, c)?;
    Ok(DMatrix::from_fn(n, n, |i, j| eval.log_p(i, j).exp()))
}
