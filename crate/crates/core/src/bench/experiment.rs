//! Paired Monte Carlo sweeps.

use std::collections::HashSet;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Method, Scheme};
use super::report::{NmseReport, RowStatus, TrialRow};
use crate::completion::{self, Interpolator, Knn};
use crate::error::{Error, Result};
use crate::field::{self, Cell, RadioMap, ShadowingGenerator};
use crate::leverage::estimated_scores;
use crate::rng::{self, label};
use crate::sampling::{self, SamplingPlan, Strategy};

/// FNV-1a over the bit patterns of a matrix, column-major.
pub fn matrix_hash(m: &DMatrix<f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in m.iter() {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Seed of the ground-truth field for trial `t`. Independent of strategy and
/// sweep point, so every method is scored against the same maps.
pub fn truth_seed(master: u64, trial: usize) -> u64 {
    rng::derive_seed(master, &[label::TRUTH, trial as u64])
}

/// Seed of the measurement streams for budget `m` in trial `t`. Shared by
/// all strategies: their uniform first rounds coincide.
pub fn measurement_seed(master: u64, m: usize, trial: usize) -> u64 {
    rng::derive_seed(master, &[label::MEASURE, m as u64, trial as u64])
}

struct Outcome {
    nmse: f64,
    iterations: usize,
    converged: bool,
}

struct Job {
    method_idx: usize,
    sweep_idx: usize,
    trial: usize,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<NmseReport> {
    config.validate()?;
    let generator = if config.field.shadowing.enabled {
        Some(ShadowingGenerator::new(&config.field.shadowing, config.field.area_side)?)
    } else {
        None
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    // One truth per trial, shared across strategies and sweep points.
    let truths: Vec<std::result::Result<RadioMap, String>> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let spec = config.field.realize(truth_seed(config.seed, t))?;
                field::build_ground_truth_with(&spec, generator.as_ref())
            })
            .map(|r| r.map_err(|e| e.to_string()))
            .collect()
    });

    let mut jobs = Vec::new();
    for method_idx in 0..config.methods.len() {
        for sweep_idx in 0..config.sweep.values.len() {
            for trial in 0..config.trials {
                jobs.push(Job {
                    method_idx,
                    sweep_idx,
                    trial,
                });
            }
        }
    }
    let rows: Vec<TrialRow> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let method = config.methods[job.method_idx];
                let (m, m0) = config.budgets(job.sweep_idx);
                let seed = measurement_seed(config.seed, m, job.trial);
                let start = Instant::now();
                let (truth_hash, result) = match &truths[job.trial] {
                    Ok(truth) => (
                        matrix_hash(&truth.values),
                        run_trial(config, method, truth, m, m0, seed).map_err(|e| e.to_string()),
                    ),
                    Err(e) => (0, Err(format!("ground truth: {e}"))),
                };
                let wall_time_seconds = start.elapsed().as_secs_f64();
                let (nmse, iterations, converged, status) = match result {
                    Ok(o) => (Some(o.nmse), o.iterations, o.converged, RowStatus::Ok),
                    Err(e) => (None, 0, false, RowStatus::Failed(e)),
                };
                TrialRow {
                    strategy: method.name().to_string(),
                    sweep_value: config.sweep.values[job.sweep_idx],
                    trial: job.trial,
                    seed,
                    nmse,
                    iterations,
                    converged,
                    truth_hash,
                    status,
                    wall_time_seconds,
                }
            })
            .collect()
    });
    Ok(NmseReport::new(rows))
}

fn run_trial(
    config: &ExperimentConfig,
    method: Method,
    truth: &RadioMap,
    m: usize,
    m0: usize,
    seed: u64,
) -> Result<Outcome> {
    let n = truth.side();
    let knn = Knn { k: config.k };
    let sigma = config.field.noise_sigma;
    let result = match config.scheme {
        Scheme::MatrixCompletion => {
            let Method::Sampling(strategy) = method else {
                return Err(Error::Config("knn needs the interpolation-assisted scheme".into()));
            };
            let plan = SamplingPlan {
                strategy,
                budget: m,
                first_round_fraction: config.iota,
                mode: config.mode,
                leverage_weighting: config.leverage_weighting,
                rank_selection: config.rank_selection,
                seed,
            };
            let planned = sampling::run_two_round_plan(truth, &plan, &knn, sigma)?;
            completion::svt_complete(&planned.samples, n, &config.svt)?
        }
        Scheme::InterpolationAssisted => {
            let plan = SamplingPlan::new(Strategy::Uniform, m, seed);
            let measured = sampling::run_two_round_plan(truth, &plan, &knn, sigma)?.samples;
            let estimate = knn.interpolate(&measured, n)?;
            let strategy = match method {
                Method::Knn => {
                    return Ok(Outcome {
                        nmse: completion::nmse(&estimate, &truth.values)?,
                        iterations: 0,
                        converged: true,
                    })
                }
                Method::Sampling(s) => s,
            };
            let scores = estimated_scores(&estimate, &config.rank_selection)?;
            let weights =
                sampling::design_weights(strategy, &estimate, &scores, config.leverage_weighting)?;
            let excluded: HashSet<Cell> = measured.cells().collect();
            let mut rng = rng::stream(seed, &[label::ROUND_TWO]);
            let cells = sampling::draw_cells(&weights, &excluded, m0, config.mode, &mut rng)?;
            completion::interpolation_assisted_complete(&measured, &cells, config.k, n, &config.svt)?
        }
    };
    Ok(Outcome {
        nmse: completion::nmse(&result.map.values, &truth.values)?,
        iterations: result.iterations,
        converged: result.converged,
    })
}
