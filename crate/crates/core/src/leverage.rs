//! Truncated SVD, row/column leverage scores and leverage probabilities.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Top-`rank` singular triplets, singular values sorted nonincreasing.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (k, s) in self.singular_values.iter().enumerate() {
            us.column_mut(k).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

fn faer_view(m: &DMatrix<f64>) -> faer::MatRef<'_, f64> {
    faer::MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

/// Thin SVD with singular values sorted in nonincreasing order.
///
/// Backed by faer: nalgebra's bidiagonal SVD returns wrong factors for a
/// noticeable share of exactly low-rank inputs.
pub(crate) fn sorted_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let svd = faer_view(m)
        .thin_svd()
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |i, k| u[(i, order[k])]);
    let v = DMatrix::from_fn(v.nrows(), order.len(), |j, k| v[(j, order[k])]);
    let s = DVector::from_fn(order.len(), |k, _| s[order[k]]);
    Ok((u, s, v))
}

/// Singular values, nonincreasing.
pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let mut s = faer_view(m)
        .singular_values()
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(DVector::from_vec(s))
}

pub fn truncated_svd(m: &DMatrix<f64>, rank: usize) -> Result<SvdFactors> {
    let n = m.nrows().min(m.ncols());
    if rank == 0 || rank > n {
        return Err(Error::RankOutOfRange { rank, max: n });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let (u, s, v) = sorted_svd(m)?;
    let floor = s[0] * f64::EPSILON * m.nrows().max(m.ncols()) as f64;
    if s[0] == 0.0 || s[rank - 1] <= floor {
        return Err(Error::RankDeficient(rank));
    }
    Ok(SvdFactors {
        u: u.columns(0, rank).into_owned(),
        singular_values: s.rows(0, rank).into_owned(),
        v: v.columns(0, rank).into_owned(),
    })
}

/// Number of singular values above `rel_tol * sigma_1`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let max = s.max();
    if max == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&v| v > rel_tol * max).count())
}

/// How the rank of an estimated map is chosen before computing scores.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankSelection {
    /// Fraction of squared Frobenius energy the retained singular values
    /// must capture.
    pub energy_fraction: f64,
    pub max_rank: usize,
}

impl Default for RankSelection {
    fn default() -> Self {
        RankSelection {
            energy_fraction: 0.99,
            max_rank: 10,
        }
    }
}

impl RankSelection {
    /// Smallest `r` whose top-`r` singular values hold `energy_fraction` of
    /// the energy, capped at `max_rank` and at the numerical rank.
    pub fn select(&self, singular_values: &DVector<f64>) -> usize {
        let total: f64 = singular_values.iter().map(|s| s * s).sum();
        let max = singular_values.iter().cloned().fold(0.0, f64::max);
        let numerical = singular_values
            .iter()
            .filter(|&&s| s > max * 1e-12)
            .count()
            .max(1);
        let mut acc = 0.0;
        let mut r = singular_values.len();
        for (k, s) in singular_values.iter().enumerate() {
            acc += s * s;
            if acc >= self.energy_fraction * total {
                r = k + 1;
                break;
            }
        }
        r.min(self.max_rank).min(numerical).max(1)
    }
}

/// Row scores `mu`, column scores `nu` and the rank they were computed at.
#[derive(Clone, Debug, PartialEq)]
pub struct LeverageScores {
    pub mu: DVector<f64>,
    pub nu: DVector<f64>,
    pub rank: usize,
}

impl LeverageScores {
    pub fn side(&self) -> usize {
        self.mu.len()
    }
}

/// `mu_i = N |U^T e_i|^2 / r`, `nu_j = N |V^T e_j|^2 / r`.
pub fn leverage_scores(factors: &SvdFactors) -> Result<LeverageScores> {
    let r = factors.rank();
    if r == 0 || factors.singular_values.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::RankDeficient(r));
    }
    let scores = |m: &DMatrix<f64>| {
        let n = m.nrows() as f64;
        DVector::from_iterator(
            m.nrows(),
            m.row_iter().map(|row| n * row.norm_squared() / r as f64),
        )
    };
    Ok(LeverageScores {
        mu: scores(&factors.u),
        nu: scores(&factors.v),
        rank: r,
    })
}

/// Per-entry inclusion probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityField {
    pub p: DMatrix<f64>,
    /// Expected number of sampled entries, `sum p_ij`.
    pub target_count: f64,
}

impl ProbabilityField {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::invalid("probability", "entries must lie in [0, 1]"));
        }
        let target_count = p.sum();
        Ok(ProbabilityField { p, target_count })
    }

    pub fn side(&self) -> usize {
        self.p.nrows()
    }
}

/// Unclipped leverage expression `C (mu_i + nu_j) r log^2(2N) / N`.
pub fn leverage_expression(scores: &LeverageScores, c: f64) -> DMatrix<f64> {
    let n = scores.side();
    let scale = c * scores.rank as f64 * (2.0 * n as f64).ln().powi(2) / n as f64;
    raw_score_field(scores) * scale
}

/// `p_ij = min{C (mu_i + nu_j) r log^2(2N) / N, 1}`.
pub fn leverage_probability(scores: &LeverageScores, c: f64) -> Result<ProbabilityField> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid("C", format!("{c} must be finite and > 0")));
    }
    let p = leverage_expression(scores, c).map(|v| v.min(1.0));
    ProbabilityField::new(p)
}

/// `p_hat_ij = mu_i + nu_j`, no constants or clipping.
pub fn raw_score_field(scores: &LeverageScores) -> DMatrix<f64> {
    let n = scores.side();
    DMatrix::from_fn(n, n, |i, j| scores.mu[i] + scores.nu[j])
}

/// Leverage scores of a map estimate, with the rank picked by `selection`.
pub fn estimated_scores(map: &DMatrix<f64>, selection: &RankSelection) -> Result<LeverageScores> {
    if map.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("map estimate"));
    }
    let (u, s, v) = sorted_svd(map)?;
    if s[0] == 0.0 {
        return Err(Error::RankDeficient(1));
    }
    let r = selection.select(&s);
    leverage_scores(&SvdFactors {
        u: u.columns(0, r).into_owned(),
        singular_values: s.rows(0, r).into_owned(),
        v: v.columns(0, r).into_owned(),
    })
}
