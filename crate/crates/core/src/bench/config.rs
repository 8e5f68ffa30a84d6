//! `key = value` configuration files.
//!
//! One setting per line, dotted section prefixes, `#` starts a comment.
//! Every key must appear in [`KNOWN_KEYS`]; anything else is rejected so a
//! typo in a sweep definition fails loudly instead of silently running the
//! default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::completion::SvtParams;
use crate::error::{Error, Result};
use crate::field::{AbsorptionSign, FieldSpec, ShadowingSpec, SourceModel, SourceSpec};
use crate::leverage::RankSelection;
use crate::rng::{self, label};
use crate::sampling::{LeverageWeighting, SamplingMode, Strategy};

/// Every accepted key with a one-line description.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("field.L", "area side length in meters (2000)"),
    ("field.N", "grid side count (100)"),
    ("field.noise_sigma", "measurement noise standard deviation (0.1)"),
    ("field.seed", "seed of the simulated field for `simulate` (1)"),
    ("field.model", "source model: underwater | gaussian (underwater)"),
    ("field.power", "underwater source power P (100)"),
    ("field.absorption", "underwater absorption factor A (0.8)"),
    ("field.depth", "underwater receiver depth h in meters (400)"),
    ("field.absorption_sign", "decaying: A^(+d/unit) | literal: A^(-d/unit) (decaying)"),
    ("field.absorption_unit", "meters per power of A (1)"),
    ("field.alpha", "gaussian source amplitude (1)"),
    ("field.beta", "gaussian source decay per m^2 (1e-5)"),
    ("field.source_count", "sources drawn uniformly from the central 80% of the area (3)"),
    ("field.sources", "explicit source locations `x y; x y; ...`, overrides source_count"),
    ("shadowing.enabled", "additive lognormal shadowing on/off (true)"),
    ("shadowing.sigma_sq", "variance of the log10 shadowing field (1)"),
    ("shadowing.corr_distance", "correlation distance in meters (200)"),
    ("shadowing.resolution", "coarse generator grid side count (50)"),
    ("experiment.scheme", "matrix_completion | interpolation_assisted (matrix_completion)"),
    ("experiment.strategies", "comma list of uniform, leverage, energy_modified, knn"),
    ("experiment.trials", "paired trials per sweep value (20)"),
    ("experiment.seed", "master seed (1)"),
    ("experiment.workers", "worker threads (1)"),
    ("sweep.axis", "sampling_ratio | interpolation_ratio (sampling_ratio)"),
    ("sweep.values", "comma list of ratios in (0, 1]"),
    ("sampling.ratio", "M/N^2 when sweeping the interpolation ratio (0.1)"),
    ("sampling.iota", "first-round fraction for two-round strategies (0.7)"),
    ("sampling.mode", "exact_count | bernoulli (exact_count)"),
    ("sampling.leverage_weights", "raw_scores | probability (raw_scores)"),
    ("sampling.leverage_c", "constant C for leverage_weights = probability (1)"),
    ("sampling.strategy", "strategy for the `sample` subcommand (energy_modified)"),
    ("interp.count", "interpolated cells M0 when sweeping the sampling ratio (3000)"),
    ("interp.k", "KNN neighbour count (3)"),
    ("rank.energy_fraction", "energy kept when choosing the rank of a map estimate (0.99)"),
    ("rank.max", "rank cap for map estimates (10)"),
    ("svt.tau", "singular value threshold on RMS-normalised data (5N)"),
    ("svt.step", "SVT step size (1.2 N^2 / observed count)"),
    ("svt.max_iters", "SVT iteration cap (500)"),
    ("svt.rel_tol", "relative observed-residual stopping tolerance (1e-4)"),
    ("output.path", "report CSV path"),
    ("theory.kind", "pseudo_image | consistency | both (both)"),
    ("theory.N", "grid side of the two-source construction (64)"),
    ("theory.offset", "second source offset L1 in grid units (32)"),
    ("theory.alpha", "source amplitude (1)"),
    ("theory.c", "leverage constant C (1)"),
    ("theory.delta", "pseudo-image region half-width (4)"),
    ("theory.betas", "beta values for the pseudo-image trace (0.05, 0.1, 0.2, 0.4)"),
    ("theory.beta", "beta for the consistency trace (0.1)"),
    ("theory.deltas", "decreasing region half-widths for the consistency trace (4, 2, 1, 0)"),
];

/// Raw parsed key/value pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap {
    values: BTreeMap<String, (String, usize)>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
                line: idx + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if !KNOWN_KEYS.iter().any(|(k, _)| *k == key) {
                return Err(Error::Config(format!("unknown key `{key}` on line {}", idx + 1)));
            }
            if values
                .insert(key.to_string(), (value.trim().to_string(), idx + 1))
                .is_some()
            {
                return Err(Error::Config(format!("key `{key}` repeated on line {}", idx + 1)));
            }
        }
        Ok(ConfigMap { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), (value.into(), 0));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("`{key}` (line {line}): cannot parse `{v}`: {e}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|item| {
                    item.trim().parse().map_err(|e| {
                        Error::Config(format!("`{key}` (line {line}): cannot parse `{item}`: {e}"))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn choice<T>(&self, key: &str, default: T, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => parse(v).ok_or_else(|| Error::Config(format!("`{key}`: unknown value `{v}`"))),
        }
    }
}

/// How sources are placed in each simulated field.
#[derive(Clone, Debug, PartialEq)]
pub enum SourcePlacement {
    /// Fixed locations, identical in every trial.
    Fixed(Vec<[f64; 2]>),
    /// `count` sources drawn per field from the central 80% of the area.
    Random(usize),
}

/// Everything needed to draw a [`FieldSpec`] for a given seed.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldTemplate {
    pub area_side: f64,
    pub grid_side: usize,
    pub model: SourceModel,
    pub placement: SourcePlacement,
    pub shadowing: ShadowingSpec,
    pub noise_sigma: f64,
}

impl Default for FieldTemplate {
    fn default() -> Self {
        FieldTemplate {
            area_side: 2000.0,
            grid_side: 100,
            model: SourceModel::underwater(100.0, 0.8, 400.0),
            placement: SourcePlacement::Random(3),
            shadowing: ShadowingSpec::default(),
            noise_sigma: 0.1,
        }
    }
}

impl FieldTemplate {
    pub fn from_config(map: &ConfigMap) -> Result<Self> {
        let d = FieldTemplate::default();
        let model = match map.raw("field.model").unwrap_or("underwater") {
            "underwater" => SourceModel::Underwater {
                power: map.get_or("field.power", 100.0)?,
                absorption: map.get_or("field.absorption", 0.8)?,
                depth: map.get_or("field.depth", 400.0)?,
                sign: map.choice("field.absorption_sign", AbsorptionSign::Decaying, |v| match v {
                    "decaying" => Some(AbsorptionSign::Decaying),
                    "literal" => Some(AbsorptionSign::Literal),
                    _ => None,
                })?,
                unit: map.get_or("field.absorption_unit", 1.0)?,
            },
            "gaussian" => SourceModel::Gaussian {
                alpha: map.get_or("field.alpha", 1.0)?,
                beta: map.get_or("field.beta", 1e-5)?,
            },
            other => return Err(Error::Config(format!("`field.model`: unknown value `{other}`"))),
        };
        let placement = match map.raw("field.sources") {
            Some(list) => SourcePlacement::Fixed(parse_locations(list)?),
            None => SourcePlacement::Random(map.get_or("field.source_count", 3)?),
        };
        let template = FieldTemplate {
            area_side: map.get_or("field.L", d.area_side)?,
            grid_side: map.get_or("field.N", d.grid_side)?,
            model,
            placement,
            shadowing: ShadowingSpec {
                enabled: map.get_or("shadowing.enabled", d.shadowing.enabled)?,
                sigma_sq: map.get_or("shadowing.sigma_sq", d.shadowing.sigma_sq)?,
                corr_distance: map.get_or("shadowing.corr_distance", d.shadowing.corr_distance)?,
                resolution: map.get_or("shadowing.resolution", d.shadowing.resolution)?,
            },
            noise_sigma: map.get_or("field.noise_sigma", d.noise_sigma)?,
        };
        template.realize(0)?.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(template)
    }

    /// Field spec for one seed. Random source locations come from a stream
    /// derived from `seed`, shadowing from another.
    pub fn realize(&self, seed: u64) -> Result<FieldSpec> {
        let sources = match &self.placement {
            SourcePlacement::Fixed(locs) => locs
                .iter()
                .map(|&location| SourceSpec {
                    location,
                    model: self.model.clone(),
                })
                .collect(),
            SourcePlacement::Random(count) => {
                let mut rng = rng::stream(seed, &[label::SOURCES]);
                crate::field::random_sources(*count, self.area_side, &self.model, &mut rng)
            }
        };
        Ok(FieldSpec {
            area_side: self.area_side,
            grid_side: self.grid_side,
            sources,
            shadowing: self.shadowing.clone(),
            noise_sigma: self.noise_sigma,
            seed,
        })
    }

    /// Config lines reproducing this template.
    pub fn to_config(&self) -> String {
        let mut lines = vec![
            format!("field.L = {}", self.area_side),
            format!("field.N = {}", self.grid_side),
            format!("field.noise_sigma = {}", self.noise_sigma),
        ];
        match &self.model {
            SourceModel::Underwater {
                power,
                absorption,
                depth,
                sign,
                unit,
            } => {
                lines.push("field.model = underwater".into());
                lines.push(format!("field.power = {power}"));
                lines.push(format!("field.absorption = {absorption}"));
                lines.push(format!("field.depth = {depth}"));
                lines.push(format!(
                    "field.absorption_sign = {}",
                    match sign {
                        AbsorptionSign::Decaying => "decaying",
                        AbsorptionSign::Literal => "literal",
                    }
                ));
                lines.push(format!("field.absorption_unit = {unit}"));
            }
            SourceModel::Gaussian { alpha, beta } => {
                lines.push("field.model = gaussian".into());
                lines.push(format!("field.alpha = {alpha}"));
                lines.push(format!("field.beta = {beta}"));
            }
        }
        match &self.placement {
            SourcePlacement::Random(count) => lines.push(format!("field.source_count = {count}")),
            SourcePlacement::Fixed(locs) => {
                let items: Vec<String> = locs.iter().map(|[x, y]| format!("{x} {y}")).collect();
                lines.push(format!("field.sources = {}", items.join("; ")));
            }
        }
        lines.push(format!("shadowing.enabled = {}", self.shadowing.enabled));
        lines.push(format!("shadowing.sigma_sq = {}", self.shadowing.sigma_sq));
        lines.push(format!("shadowing.corr_distance = {}", self.shadowing.corr_distance));
        lines.push(format!("shadowing.resolution = {}", self.shadowing.resolution));
        lines.join("\n") + "\n"
    }
}

fn parse_locations(list: &str) -> Result<Vec<[f64; 2]>> {
    list.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let coords: Vec<f64> = item
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("`field.sources`: {e}")))?;
            match coords[..] {
                [x, y] => Ok([x, y]),
                _ => Err(Error::Config(format!("`field.sources`: expected `x y`, got `{item}`"))),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Measurements are completed directly.
    MatrixCompletion,
    /// KNN pseudo-measurements are added before completion.
    InterpolationAssisted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Sampling(Strategy),
    /// Plain KNN map from the measurements; interpolation-assisted scheme
    /// only.
    Knn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sampling(s) => s.name(),
            Method::Knn => "knn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "knn" => Some(Method::Knn),
            other => Strategy::parse(other).map(Method::Sampling),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    SamplingRatio,
    InterpolationRatio,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub field: FieldTemplate,
    pub scheme: Scheme,
    pub methods: Vec<Method>,
    pub sweep: Sweep,
    /// `M/N^2` when the sweep runs over the interpolation ratio.
    pub sampling_ratio: f64,
    /// `M0` when the sweep runs over the sampling ratio.
    pub interp_count: usize,
    pub iota: f64,
    pub mode: SamplingMode,
    pub leverage_weighting: LeverageWeighting,
    pub rank_selection: RankSelection,
    pub trials: usize,
    pub svt: SvtParams,
    pub k: usize,
    pub seed: u64,
    pub workers: usize,
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            field: FieldTemplate::default(),
            scheme: Scheme::MatrixCompletion,
            methods: vec![
                Method::Sampling(Strategy::Uniform),
                Method::Sampling(Strategy::Leverage),
                Method::Sampling(Strategy::EnergyModified),
            ],
            sweep: Sweep {
                axis: SweepAxis::SamplingRatio,
                values: vec![0.1, 0.2, 0.3, 0.4],
            },
            sampling_ratio: 0.1,
            interp_count: 3000,
            iota: 0.7,
            mode: SamplingMode::ExactCount,
            leverage_weighting: LeverageWeighting::RawScores,
            rank_selection: RankSelection::default(),
            trials: 20,
            svt: SvtParams::default(),
            k: 3,
            seed: 1,
            workers: 1,
            output_path: None,
        }
    }
}

pub fn parse_sampling_mode(v: &str) -> Option<SamplingMode> {
    match v {
        "exact_count" => Some(SamplingMode::ExactCount),
        "bernoulli" => Some(SamplingMode::Bernoulli),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn from_config(map: &ConfigMap) -> Result<Self> {
        let d = ExperimentConfig::default();
        let scheme = map.choice("experiment.scheme", d.scheme, |v| match v {
            "matrix_completion" => Some(Scheme::MatrixCompletion),
            "interpolation_assisted" => Some(Scheme::InterpolationAssisted),
            _ => None,
        })?;
        let methods = match map.list::<String>("experiment.strategies")? {
            None => d.methods.clone(),
            Some(names) => names
                .iter()
                .map(|n| {
                    Method::parse(n)
                        .ok_or_else(|| Error::Config(format!("`experiment.strategies`: unknown `{n}`")))
                })
                .collect::<Result<_>>()?,
        };
        let axis = map.choice("sweep.axis", d.sweep.axis, |v| match v {
            "sampling_ratio" => Some(SweepAxis::SamplingRatio),
            "interpolation_ratio" => Some(SweepAxis::InterpolationRatio),
            _ => None,
        })?;
        let leverage_weighting = match map.raw("sampling.leverage_weights").unwrap_or("raw_scores") {
            "raw_scores" => LeverageWeighting::RawScores,
            "probability" => LeverageWeighting::Probability {
                c: map.get_or("sampling.leverage_c", 1.0)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "`sampling.leverage_weights`: unknown value `{other}`"
                )))
            }
        };
        let cfg = ExperimentConfig {
            field: FieldTemplate::from_config(map)?,
            scheme,
            methods,
            sweep: Sweep {
                axis,
                values: map.list("sweep.values")?.unwrap_or(d.sweep.values),
            },
            sampling_ratio: map.get_or("sampling.ratio", d.sampling_ratio)?,
            interp_count: map.get_or("interp.count", d.interp_count)?,
            iota: map.get_or("sampling.iota", d.iota)?,
            mode: map.choice("sampling.mode", d.mode, parse_sampling_mode)?,
            leverage_weighting,
            rank_selection: RankSelection {
                energy_fraction: map.get_or("rank.energy_fraction", d.rank_selection.energy_fraction)?,
                max_rank: map.get_or("rank.max", d.rank_selection.max_rank)?,
            },
            trials: map.get_or("experiment.trials", d.trials)?,
            svt: SvtParams {
                tau: parse_auto(map, "svt.tau")?,
                step: parse_auto(map, "svt.step")?,
                max_iters: map.get_or("svt.max_iters", d.svt.max_iters)?,
                rel_tol: map.get_or("svt.rel_tol", d.svt.rel_tol)?,
            },
            k: map.get_or("interp.k", d.k)?,
            seed: map.get_or("experiment.seed", d.seed)?,
            workers: map.get_or("experiment.workers", d.workers)?,
            output_path: map.get::<PathBuf>("output.path")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n2 = self.field.grid_side * self.field.grid_side;
        let fail = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return fail("experiment.trials must be >= 1".into());
        }
        if self.methods.is_empty() {
            return fail("experiment.strategies is empty".into());
        }
        if self.scheme == Scheme::MatrixCompletion && self.methods.contains(&Method::Knn) {
            return fail("knn is only available with experiment.scheme = interpolation_assisted".into());
        }
        if self.sweep.values.is_empty() {
            return fail("sweep.values is empty".into());
        }
        for &v in &self.sweep.values {
            if !(v > 0.0 && v <= 1.0) {
                return fail(format!("sweep value {v} outside (0, 1]"));
            }
        }
        if !(self.sampling_ratio > 0.0 && self.sampling_ratio <= 1.0) {
            return fail("sampling.ratio outside (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.iota) {
            return fail("sampling.iota outside [0, 1]".into());
        }
        if self.k == 0 {
            return fail("interp.k must be >= 1".into());
        }
        if self.workers == 0 {
            return fail("experiment.workers must be >= 1".into());
        }
        self.svt.validate().map_err(|e| Error::Config(e.to_string()))?;
        for idx in 0..self.sweep.values.len() {
            let (m, m0) = self.budgets(idx);
            if m == 0 {
                return fail(format!("sweep value {} gives M = 0", self.sweep.values[idx]));
            }
            if self.scheme == Scheme::InterpolationAssisted && m + m0 > n2 {
                return fail(format!("M + M0 = {} exceeds N^2 = {n2}", m + m0));
            }
        }
        Ok(())
    }

    /// `(M, M0)` for sweep point `idx`.
    pub fn budgets(&self, idx: usize) -> (usize, usize) {
        let n2 = (self.field.grid_side * self.field.grid_side) as f64;
        let v = self.sweep.values[idx];
        match self.sweep.axis {
            SweepAxis::SamplingRatio => ((v * n2).round() as usize, self.interp_count),
            SweepAxis::InterpolationRatio => (
                (self.sampling_ratio * n2).round() as usize,
                (v * n2).round() as usize,
            ),
        }
    }
}

fn parse_auto(map: &ConfigMap, key: &str) -> Result<Option<f64>> {
    match map.raw(key) {
        None | Some("auto") => Ok(None),
        Some(_) => map.get(key),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TheoryKind {
    PseudoImage,
    Consistency,
    Both,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryConfig {
    pub kind: TheoryKind,
    pub grid_side: usize,
    pub offset: usize,
    pub alpha: f64,
    pub c: f64,
    pub delta: usize,
    pub betas: Vec<f64>,
    pub beta: f64,
    pub deltas: Vec<usize>,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            kind: TheoryKind::Both,
            grid_side: 64,
            offset: 32,
            alpha: 1.0,
            c: 1.0,
            delta: 4,
            betas: vec![0.05, 0.1, 0.2, 0.4],
            beta: 0.1,
            deltas: vec![4, 2, 1, 0],
        }
    }
}

impl TheoryConfig {
    pub fn from_config(map: &ConfigMap) -> Result<Self> {
        let d = TheoryConfig::default();
        Ok(TheoryConfig {
            kind: map.choice("theory.kind", d.kind, |v| match v {
                "pseudo_image" => Some(TheoryKind::PseudoImage),
                "consistency" => Some(TheoryKind::Consistency),
                "both" => Some(TheoryKind::Both),
                _ => None,
            })?,
            grid_side: map.get_or("theory.N", d.grid_side)?,
            offset: map.get_or("theory.offset", d.offset)?,
            alpha: map.get_or("theory.alpha", d.alpha)?,
            c: map.get_or("theory.c", d.c)?,
            delta: map.get_or("theory.delta", d.delta)?,
            betas: map.list("theory.betas")?.unwrap_or(d.betas),
            beta: map.get_or("theory.beta", d.beta)?,
            deltas: map.list("theory.deltas")?.unwrap_or(d.deltas),
        })
    }
}
