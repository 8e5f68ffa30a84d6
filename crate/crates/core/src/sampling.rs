//! Sampling designs: uniform, leverage-weighted and energy-modified
//! leverage-weighted, plus the two-round measurement procedure.
//!
//! Two-round plans spend `floor(iota * M)` measurements uniformly, build a
//! rough map estimate from them, and spend the rest of the budget on cells
//! drawn from weights derived from that estimate. Second-round draws never
//! revisit first-round cells.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;

use crate::completion::Interpolator;
use crate::error::{Error, Result};
use crate::field::{self, Cell, RadioMap, SampleSet};
use crate::leverage::{
    estimated_scores, leverage_expression, raw_score_field, LeverageScores, ProbabilityField,
    RankSelection,
};
use crate::rng::{self, label, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    Uniform,
    Leverage,
    EnergyModified,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Leverage => "leverage",
            Strategy::EnergyModified => "energy_modified",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(Strategy::Uniform),
            "leverage" => Some(Strategy::Leverage),
            "energy_modified" | "energy" | "proposed" => Some(Strategy::EnergyModified),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMode {
    /// Each cell included independently; the budget is met in expectation.
    Bernoulli,
    /// Exactly the budgeted number of distinct cells.
    ExactCount,
}

/// Which leverage quantity weights the second round of the `Leverage`
/// strategy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LeverageWeighting {
    /// `mu_i + nu_j`; scale-free.
    RawScores,
    /// Clipped leverage probability with a fixed constant `C`. In Bernoulli
    /// mode the field is used as is, so the expected count is `sum p_ij`
    /// rather than the budget.
    Probability { c: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan {
    pub strategy: Strategy,
    /// Total measurement budget `M`.
    pub budget: usize,
    /// First-round fraction `iota`; ignored by `Uniform`.
    pub first_round_fraction: f64,
    pub mode: SamplingMode,
    pub leverage_weighting: LeverageWeighting,
    pub rank_selection: RankSelection,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(strategy: Strategy, budget: usize, seed: u64) -> Self {
        SamplingPlan {
            strategy,
            budget,
            first_round_fraction: 0.7,
            mode: SamplingMode::ExactCount,
            leverage_weighting: LeverageWeighting::RawScores,
            rank_selection: RankSelection::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("budget", "M must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.first_round_fraction) {
            return Err(Error::invalid("iota", "must lie in [0, 1]"));
        }
        if let LeverageWeighting::Probability { c } = self.leverage_weighting {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid("C", "must be finite and > 0"));
            }
        }
        Ok(())
    }

    pub fn first_round_count(&self) -> usize {
        match self.strategy {
            Strategy::Uniform => self.budget,
            _ => (self.first_round_fraction * self.budget as f64 + 1e-9).floor() as usize,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleIndexSet {
    pub cells: Vec<Cell>,
    pub rounds: Vec<Round>,
}

impl SampleIndexSet {
    fn single_round(cells: Vec<Cell>, round: Round) -> Self {
        let rounds = vec![round; cells.len()];
        SampleIndexSet { cells, rounds }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

fn cell_of(flat: usize, n: usize) -> Cell {
    (flat / n, flat % n)
}

/// `m` distinct cells drawn uniformly without replacement.
pub fn uniform_sample(n: usize, m: usize, seed: u64) -> Result<SampleIndexSet> {
    let mut rng = rng::stream(seed, &[label::ROUND_ONE]);
    Ok(SampleIndexSet::single_round(
        uniform_cells(n, m, &mut rng)?,
        Round::First,
    ))
}

fn uniform_cells(n: usize, m: usize, rng: &mut StreamRng) -> Result<Vec<Cell>> {
    if m > n * n {
        return Err(Error::invalid("m", format!("{m} exceeds the {} cells", n * n)));
    }
    let mut flat = index::sample(rng, n * n, m).into_vec();
    flat.sort_unstable();
    Ok(flat.into_iter().map(|f| cell_of(f, n)).collect())
}

/// Include each cell independently with probability `p_ij`.
pub fn bernoulli_sample(field: &ProbabilityField, seed: u64) -> SampleIndexSet {
    let mut rng = rng::stream(seed, &[label::ROUND_TWO]);
    SampleIndexSet::single_round(bernoulli_cells(&field.p, &mut rng), Round::Second)
}

fn bernoulli_cells(p: &DMatrix<f64>, rng: &mut StreamRng) -> Vec<Cell> {
    let n = p.nrows();
    let mut cells = Vec::new();
    for i in 0..n {
        for j in 0..n {
            // one draw per cell keeps the stream aligned across fields
            let u: f64 = rng.random();
            if u < p[(i, j)] {
                cells.push((i, j));
            }
        }
    }
    cells
}

/// `m` distinct cells by sequential weighted sampling without replacement.
pub fn exact_count_sample(weights: &DMatrix<f64>, m: usize, seed: u64) -> Result<SampleIndexSet> {
    let mut rng = rng::stream(seed, &[label::ROUND_TWO]);
    Ok(SampleIndexSet::single_round(
        weighted_cells(weights, m, &mut rng)?,
        Round::Second,
    ))
}

fn weighted_cells(weights: &DMatrix<f64>, m: usize, rng: &mut StreamRng) -> Result<Vec<Cell>> {
    let n = weights.nrows();
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("weights", "must be finite and >= 0"));
    }
    let available = weights.iter().filter(|&&w| w > 0.0).count();
    if available < m {
        return Err(Error::InsufficientSupport {
            available,
            requested: m,
        });
    }
    // row-major flat index, matching `cell_of`
    let picked = index::sample_weighted(rng, n * n, |f| weights[cell_of(f, n)], m)
        .map_err(|e| Error::invalid("weights", e.to_string()))?;
    let mut flat = picked.into_vec();
    flat.sort_unstable();
    Ok(flat.into_iter().map(|f| cell_of(f, n)).collect())
}

/// Scale nonnegative `weights` into probabilities `min(C w_ij, 1)` whose sum
/// equals `target`. Cells that saturate at 1 are fixed and the constant is
/// recomputed over the rest until no new cell saturates.
pub fn calibrate_probabilities(weights: &DMatrix<f64>, target: f64) -> Result<ProbabilityField> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("weights", "must be finite and >= 0"));
    }
    if !(target.is_finite() && target >= 0.0) {
        return Err(Error::invalid("target_count", "must be finite and >= 0"));
    }
    let support = weights.iter().filter(|&&w| w > 0.0).count();
    if target > support as f64 * (1.0 + 1e-12) {
        return Err(Error::InsufficientSupport {
            available: support,
            requested: target.ceil() as usize,
        });
    }
    if target == 0.0 {
        return Ok(ProbabilityField {
            p: DMatrix::zeros(weights.nrows(), weights.ncols()),
            target_count: 0.0,
        });
    }
    let mut saturated = vec![false; weights.len()];
    let mut n_saturated = 0usize;
    let mut c;
    loop {
        let free_mass: f64 = weights
            .iter()
            .zip(&saturated)
            .filter(|(_, s)| !**s)
            .map(|(w, _)| *w)
            .sum();
        let remaining = target - n_saturated as f64;
        c = if free_mass > 0.0 { remaining / free_mass } else { 0.0 };
        let mut changed = false;
        for (k, w) in weights.iter().enumerate() {
            if !saturated[k] && *w > 0.0 && c * w >= 1.0 {
                saturated[k] = true;
                n_saturated += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let p = DMatrix::from_iterator(
        weights.nrows(),
        weights.ncols(),
        weights
            .iter()
            .zip(&saturated)
            .map(|(w, s)| if *s { 1.0 } else { (c * w).min(1.0) }),
    );
    Ok(ProbabilityField {
        p,
        target_count: target,
    })
}

/// Energy-modified weights `sqrt(max(H_hat, 0) * p_hat)`.
pub fn energy_weights(h_hat: &DMatrix<f64>, p_hat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if h_hat.shape() != p_hat.shape() {
        return Err(Error::DimensionMismatch {
            expected: h_hat.nrows(),
            rows: p_hat.nrows(),
            cols: p_hat.ncols(),
        });
    }
    if p_hat.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid("p_hat", "must be >= 0 entrywise"));
    }
    if h_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("map estimate"));
    }
    Ok(h_hat.zip_map(p_hat, |h, p| (h.max(0.0) * p).sqrt()))
}

/// `p~_ij = min(C1 sqrt(max(H_hat, 0) p_hat), 1)` with `C1` such that the
/// field sums to `target_count`.
pub fn energy_modified_field(
    h_hat: &DMatrix<f64>,
    p_hat: &DMatrix<f64>,
    target_count: f64,
) -> Result<ProbabilityField> {
    let w = energy_weights(h_hat, p_hat)?;
    if target_count > (w.len() as f64) {
        return Err(Error::invalid("target_count", "exceeds N^2"));
    }
    if target_count > 0.0 && w.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("weights", "all energy-modified weights are zero"));
    }
    calibrate_probabilities(&w, target_count)
}

/// Weights a strategy uses to place second-round measurements (or
/// interpolation points) given a rough map estimate.
pub fn design_weights(
    strategy: Strategy,
    h_hat: &DMatrix<f64>,
    scores: &LeverageScores,
    weighting: LeverageWeighting,
) -> Result<DMatrix<f64>> {
    match strategy {
        Strategy::Uniform => Ok(DMatrix::from_element(h_hat.nrows(), h_hat.ncols(), 1.0)),
        Strategy::Leverage => Ok(match weighting {
            LeverageWeighting::RawScores => raw_score_field(scores),
            LeverageWeighting::Probability { c } => {
                leverage_expression(scores, c).map(|v| v.min(1.0))
            }
        }),
        Strategy::EnergyModified => energy_weights(h_hat, &raw_score_field(scores)),
    }
}

/// Draw `count` cells (exactly, or in expectation for Bernoulli mode) from
/// `weights`, never selecting a cell in `excluded`.
pub fn draw_cells(
    weights: &DMatrix<f64>,
    excluded: &HashSet<Cell>,
    count: usize,
    mode: SamplingMode,
    rng: &mut StreamRng,
) -> Result<Vec<Cell>> {
    let mut w = weights.clone();
    for &c in excluded {
        w[c] = 0.0;
    }
    match mode {
        SamplingMode::ExactCount => weighted_cells(&w, count, rng),
        SamplingMode::Bernoulli => {
            let field = calibrate_probabilities(&w, count as f64)?;
            Ok(bernoulli_cells(&field.p, rng))
        }
    }
}

/// Samples produced by a plan, with the round each entry came from.
#[derive(Clone, Debug)]
pub struct PlannedSamples {
    pub samples: SampleSet,
    pub rounds: Vec<Round>,
    /// Map estimate built from the first round, for two-round strategies.
    pub estimate: Option<DMatrix<f64>>,
}

impl PlannedSamples {
    pub fn count(&self, round: Round) -> usize {
        self.rounds.iter().filter(|&&r| r == round).count()
    }
}

pub fn run_two_round_plan(
    truth: &RadioMap,
    plan: &SamplingPlan,
    interpolator: &dyn Interpolator,
    noise_sigma: f64,
) -> Result<PlannedSamples> {
    plan.validate()?;
    let n = truth.side();
    if plan.budget > n * n {
        return Err(Error::invalid("budget", format!("M={} exceeds N^2={}", plan.budget, n * n)));
    }
    let mut round_one_rng = rng::stream(plan.seed, &[label::ROUND_ONE]);
    let mut noise_one = rng::stream(plan.seed, &[label::NOISE_ONE]);
    let first_count = plan.first_round_count();
    let first_cells = uniform_cells(n, first_count, &mut round_one_rng)?;
    let mut samples = field::measure_with(truth, &first_cells, noise_sigma, &mut noise_one)?;
    let mut rounds = vec![Round::First; samples.len()];
    let second_count = plan.budget - first_count;
    if plan.strategy == Strategy::Uniform || second_count == 0 {
        return Ok(PlannedSamples {
            samples,
            rounds,
            estimate: None,
        });
    }
    if first_count == 0 {
        return Err(Error::invalid(
            "iota",
            "two-round strategies need at least one first-round measurement",
        ));
    }

    let estimate = interpolator.interpolate(&samples, n)?;
    let scores = estimated_scores(&estimate, &plan.rank_selection)?;
    let weights = design_weights(plan.strategy, &estimate, &scores, plan.leverage_weighting)?;
    let excluded: HashSet<Cell> = first_cells.iter().copied().collect();
    let mut round_two_rng = rng::stream(plan.seed, &[label::ROUND_TWO]);
    let second_cells = match (plan.strategy, plan.leverage_weighting, plan.mode) {
        (Strategy::Leverage, LeverageWeighting::Probability { .. }, SamplingMode::Bernoulli) => {
            let mut w = weights;
            for &c in &excluded {
                w[c] = 0.0;
            }
            bernoulli_cells(&w, &mut round_two_rng)
        }
        _ => draw_cells(&weights, &excluded, second_count, plan.mode, &mut round_two_rng)?,
    };
    let mut noise_two = rng::stream(plan.seed, &[label::NOISE_TWO]);
    let second = field::measure_with(truth, &second_cells, noise_sigma, &mut noise_two)?;
    rounds.extend(std::iter::repeat_n(Round::Second, second.len()));
    samples.merge(second);
    Ok(PlannedSamples {
        samples,
        rounds,
        estimate: Some(estimate),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::Knn;
    use crate::field::{gaussian_pair_field, FieldSpec};
    use crate::leverage::{leverage_scores, truncated_svd};
    use approx::assert_relative_eq;

    #[test]
    fn uniform_extremes() {
        let all = uniform_sample(5, 25, 1).unwrap();
        let set: HashSet<Cell> = all.cells.iter().copied().collect();
        assert_eq!(set.len(), 25);
        assert!(uniform_sample(5, 0, 1).unwrap().is_empty());
        assert!(uniform_sample(5, 26, 1).is_err());
    }

    #[test]
    fn uniform_inclusion_frequencies() {
        let (n, m, trials) = (10usize, 30usize, 10_000u64);
        let mut hits = vec![0u32; n * n];
        for seed in 0..trials {
            for (i, j) in uniform_sample(n, m, seed).unwrap().cells {
                hits[i * n + j] += 1;
            }
        }
        let se = (0.3 * 0.7 / trials as f64).sqrt();
        for h in hits {
            let f = h as f64 / trials as f64;
            assert!((f - 0.3).abs() <= 3.0 * se, "frequency {f}");
        }
    }

    #[test]
    fn bernoulli_extremes_and_count() {
        let zeros = ProbabilityField::new(DMatrix::zeros(6, 6)).unwrap();
        assert!(bernoulli_sample(&zeros, 3).is_empty());
        let ones = ProbabilityField::new(DMatrix::from_element(6, 6, 1.0)).unwrap();
        assert_eq!(bernoulli_sample(&ones, 3).len(), 36);

        let field = ProbabilityField::new(DMatrix::from_element(100, 100, 0.3)).unwrap();
        let mean = (0..200u64)
            .map(|s| bernoulli_sample(&field, s).len() as f64)
            .sum::<f64>()
            / 200.0;
        assert!((mean - 3000.0).abs() <= 3.0 * (10_000.0f64 * 0.3 * 0.7).sqrt());
    }

    #[test]
    fn exact_count_edge_cases() {
        let mut w = DMatrix::zeros(4, 4);
        w[(2, 3)] = 0.5;
        let s = exact_count_sample(&w, 1, 8).unwrap();
        assert_eq!(s.cells, vec![(2, 3)]);
        assert!(matches!(
            exact_count_sample(&w, 2, 8),
            Err(Error::InsufficientSupport { available: 1, requested: 2 })
        ));
        w[(0, 0)] = 1.0;
        w[(1, 1)] = 2.0;
        for seed in 0..200 {
            let s = exact_count_sample(&w, 2, seed).unwrap();
            assert!(s.cells.iter().all(|c| w[*c] > 0.0));
        }
    }

    #[test]
    fn equal_weights_behave_like_uniform() {
        let (n, m, trials) = (10usize, 30usize, 10_000u64);
        let w = DMatrix::from_element(n, n, 2.5);
        let mut hits = vec![0u32; n * n];
        for seed in 0..trials {
            for (i, j) in exact_count_sample(&w, m, seed).unwrap().cells {
                hits[i * n + j] += 1;
            }
        }
        let se = (0.3 * 0.7 / trials as f64).sqrt();
        for h in hits {
            assert!((h as f64 / trials as f64 - 0.3).abs() <= 3.0 * se);
        }
    }

    #[test]
    fn water_filling_hits_target_with_clipping() {
        let w = DMatrix::from_fn(20, 20, |i, j| if i == 0 && j < 5 { 1e6 } else { 1.0 + (i * j) as f64 });
        let f = calibrate_probabilities(&w, 50.0).unwrap();
        assert_relative_eq!(f.p.sum(), 50.0, max_relative = 1e-9);
        assert!(f.p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!((0..5).all(|j| f.p[(0, j)] == 1.0));
        // full-support target saturates everything
        let f = calibrate_probabilities(&w, 400.0).unwrap();
        assert!(f.p.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn energy_field_zero_where_no_energy() {
        let mut h = DMatrix::from_element(10, 10, 2.0);
        h[(3, 4)] = 0.0;
        h[(5, 5)] = -1.0;
        let p = DMatrix::from_element(10, 10, 2.0);
        let f = energy_modified_field(&h, &p, 20.0).unwrap();
        assert_eq!(f.p[(3, 4)], 0.0);
        assert_eq!(f.p[(5, 5)], 0.0);
        assert_relative_eq!(f.p.sum(), 20.0, max_relative = 1e-9);
    }

    #[test]
    fn uniform_energy_field() {
        let h = DMatrix::from_element(100, 100, 3.0);
        let p = DMatrix::from_element(100, 100, 2.0);
        let f = energy_modified_field(&h, &p, 500.0).unwrap();
        assert!(f.p.iter().all(|&v| (v - 0.05).abs() < 1e-12));
    }

    #[test]
    fn energy_field_rejects_degenerate_input() {
        let h = DMatrix::zeros(5, 5);
        let p = DMatrix::from_element(5, 5, 1.0);
        assert!(energy_modified_field(&h, &p, 3.0).is_err());
        assert!(energy_modified_field(&h, &p, 0.0).is_ok());
        let mut bad = p.clone();
        bad[(0, 0)] = -1.0;
        assert!(energy_modified_field(&p, &bad, 3.0).is_err());
    }

    #[test]
    fn energy_field_matches_bisection_oracle() {
        let mut spec = FieldSpec::underwater_benchmark(21);
        spec.shadowing.resolution = 25;
        let truth = crate::field::build_ground_truth(&spec).unwrap();
        let plan = SamplingPlan::new(Strategy::EnergyModified, 1000, 5);
        let planned = run_two_round_plan(&truth, &plan, &Knn { k: 3 }, 0.1).unwrap();
        let h_hat = planned.estimate.unwrap();
        let scores = estimated_scores(&h_hat, &RankSelection::default()).unwrap();
        let p_hat = raw_score_field(&scores);
        let f = energy_modified_field(&h_hat, &p_hat, 3000.0).unwrap();
        assert!((f.p.sum() - 3000.0).abs() <= 1e-3);

        // independent scalar bisection on C1
        let w: Vec<f64> = h_hat
            .iter()
            .zip(p_hat.iter())
            .map(|(h, p)| (h.max(0.0) * p).sqrt())
            .collect();
        let total = |c: f64| w.iter().map(|x| (c * x).min(1.0)).sum::<f64>();
        let (mut lo, mut hi) = (0.0, 1.0);
        while total(hi) < 3000.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if total(mid) < 3000.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c1 = 0.5 * (lo + hi);
        for (k, x) in w.iter().enumerate() {
            assert!((f.p.as_slice()[k] - (c1 * x).min(1.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn two_round_counts_and_tags() {
        let mut spec = FieldSpec::underwater_benchmark(4);
        spec.shadowing.resolution = 25;
        let truth = crate::field::build_ground_truth(&spec).unwrap();
        for strategy in [Strategy::Leverage, Strategy::EnergyModified] {
            let plan = SamplingPlan::new(strategy, 1000, 17);
            let out = run_two_round_plan(&truth, &plan, &Knn { k: 3 }, 0.1).unwrap();
            assert_eq!(out.samples.len(), 1000);
            assert_eq!(out.count(Round::First), 700);
            assert_eq!(out.count(Round::Second), 300);
            let again = run_two_round_plan(&truth, &plan, &Knn { k: 3 }, 0.1).unwrap();
            assert_eq!(out.samples, again.samples);
        }
    }

    #[test]
    fn iota_one_equals_uniform() {
        let truth = gaussian_pair_field(8, 0.05, 1.0, 20).unwrap();
        let mut plan = SamplingPlan::new(Strategy::EnergyModified, 120, 3);
        plan.first_round_fraction = 1.0;
        let two = run_two_round_plan(&truth, &plan, &Knn { k: 3 }, 0.1).unwrap();
        plan.strategy = Strategy::Uniform;
        let uni = run_two_round_plan(&truth, &plan, &Knn { k: 3 }, 0.1).unwrap();
        assert_eq!(two.samples, uni.samples);
    }

    #[test]
    fn noiseless_uniform_plan_reads_truth() {
        let truth = gaussian_pair_field(8, 0.05, 1.0, 20).unwrap();
        let plan = SamplingPlan::new(Strategy::Uniform, 50, 9);
        let out = run_two_round_plan(&truth, &plan, &Knn { k: 3 }, 0.0).unwrap();
        assert_eq!(out.samples.len(), 50);
        for s in out.samples.entries() {
            assert_eq!(s.value, truth.values[s.cell()]);
        }
    }

    #[test]
    fn bernoulli_plan_meets_budget_in_expectation() {
        let truth = gaussian_pair_field(10, 0.02, 1.0, 30).unwrap();
        let mut total = 0.0;
        for seed in 0..50 {
            let mut plan = SamplingPlan::new(Strategy::EnergyModified, 200, seed);
            plan.mode = SamplingMode::Bernoulli;
            let out = run_two_round_plan(&truth, &plan, &Knn { k: 3 }, 0.01).unwrap();
            assert_eq!(out.count(Round::First), 140);
            total += out.samples.len() as f64;
        }
        let mean = total / 50.0;
        // Bernoulli variance is at most 60 per trial
        assert!((mean - 200.0).abs() < 3.0 * (60.0f64 / 50.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn energy_field_suppresses_pseudo_image_mass() {
        let (n, l1, delta, beta) = (64usize, 32usize, 4usize, 0.2);
        let h = gaussian_pair_field(l1, beta, 1.0, n).unwrap().values;
        let scores = leverage_scores(&truncated_svd(&h, 2).unwrap()).unwrap();
        let raw = raw_score_field(&scores);
        let in_region = |i: usize, j: usize| i + delta >= l1 && i <= l1 + delta && j <= delta;
        let max_region = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| in_region(i, j))
            .map(|c| h[c])
            .fold(0.0, f64::max);
        assert!(max_region < 1e-3 * h.max());
        let target = 400.0;
        let lev = calibrate_probabilities(&raw, target).unwrap();
        let energy = energy_modified_field(&h, &raw, target).unwrap();
        let mass = |p: &DMatrix<f64>| {
            let mut m = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if in_region(i, j) {
                        m += p[(i, j)];
                    }
                }
            }
            m
        };
        assert!(mass(&energy.p) < mass(&lev.p));
    }
}
