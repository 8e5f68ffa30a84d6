//! Ground-truth radio map simulation and noisy point measurements.
//!
//! A map is the sum of per-source propagation terms evaluated at grid-cell
//! centres plus an additive, spatially correlated lognormal shadowing term
//! `10^s(c)`, where `s` is a zero-mean Gaussian field with exponential
//! covariance `sigma_sq * exp(-|c - c'| / corr_distance)`.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::rng::{self, label, StreamRng};

/// A grid cell as zero-based `(row, col)`.
pub type Cell = (usize, usize);

/// Sign convention for the absorption factor of the underwater model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbsorptionSign {
    /// `A^(+d/unit)`: attenuates with distance when `A < 1`.
    Decaying,
    /// `A^(-d/unit)` as printed for the underwater benchmark.
    Literal,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SourceModel {
    /// `alpha * exp(-beta * d^2)`, with `d` the planar distance.
    Gaussian { alpha: f64, beta: f64 },
    /// `power * d^-1.5 * absorption^(±d/unit)`, with `d` the slant distance
    /// to a receiver at `depth`.
    Underwater {
        power: f64,
        absorption: f64,
        depth: f64,
        sign: AbsorptionSign,
        /// Distance (meters) corresponding to one power of `absorption`.
        unit: f64,
    },
}

impl SourceModel {
    pub fn underwater(power: f64, absorption: f64, depth: f64) -> Self {
        SourceModel::Underwater {
            power,
            absorption,
            depth,
            sign: AbsorptionSign::Decaying,
            unit: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SourceModel::Gaussian { alpha, beta } => {
                finite_positive("alpha", alpha)?;
                finite_positive("beta", beta)
            }
            SourceModel::Underwater {
                power,
                absorption,
                depth,
                unit,
                ..
            } => {
                finite_positive("power", power)?;
                finite_positive("absorption", absorption)?;
                finite_positive("absorption_unit", unit)?;
                if !depth.is_finite() || depth < 0.0 {
                    return Err(Error::invalid("depth", format!("{depth} must be >= 0")));
                }
                Ok(())
            }
        }
    }

    /// Propagation gain at planar offset `(dx, dy)` from the source.
    pub fn gain(&self, dx: f64, dy: f64) -> f64 {
        match *self {
            SourceModel::Gaussian { alpha, beta } => alpha * (-beta * (dx * dx + dy * dy)).exp(),
            SourceModel::Underwater {
                power,
                absorption,
                depth,
                sign,
                unit,
            } => {
                let d = (dx * dx + dy * dy + depth * depth).sqrt();
                let exponent = match sign {
                    AbsorptionSign::Decaying => d / unit,
                    AbsorptionSign::Literal => -d / unit,
                };
                (power.ln() - 1.5 * d.ln() + exponent * absorption.ln()).exp()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceSpec {
    /// `(x, y)` in meters; `x` runs along rows, `y` along columns.
    pub location: [f64; 2],
    pub model: SourceModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShadowingSpec {
    pub enabled: bool,
    /// Variance of the log10 shadowing field.
    pub sigma_sq: f64,
    /// Correlation distance in meters.
    pub corr_distance: f64,
    /// Side count of the coarse grid the Gaussian field is drawn on.
    pub resolution: usize,
}

impl Default for ShadowingSpec {
    fn default() -> Self {
        ShadowingSpec {
            enabled: true,
            sigma_sq: 1.0,
            corr_distance: 200.0,
            resolution: 50,
        }
    }
}

impl ShadowingSpec {
    pub fn disabled() -> Self {
        ShadowingSpec {
            enabled: false,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.sigma_sq.is_finite() || self.sigma_sq < 0.0 {
            return Err(Error::invalid("shadowing.sigma_sq", "must be finite and >= 0"));
        }
        finite_positive("shadowing.corr_distance", self.corr_distance)?;
        if self.resolution < 2 {
            return Err(Error::invalid("shadowing.resolution", "must be >= 2"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpec {
    /// Side length `L` of the square area, meters.
    pub area_side: f64,
    /// Grid side count `N`.
    pub grid_side: usize,
    pub sources: Vec<SourceSpec>,
    pub shadowing: ShadowingSpec,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl FieldSpec {
    /// The underwater acoustic setting used by the benchmarks: 2 km square,
    /// 100x100 grid, three sources, lognormal shadowing, noise sigma 0.1.
    /// Source locations are drawn from `seed`.
    pub fn underwater_benchmark(seed: u64) -> Self {
        let area_side = 2000.0;
        let mut rng = rng::stream(seed, &[label::SOURCES]);
        let sources = random_sources(
            3,
            area_side,
            &SourceModel::underwater(100.0, 0.8, 400.0),
            &mut rng,
        );
        FieldSpec {
            area_side,
            grid_side: 100,
            sources,
            shadowing: ShadowingSpec::default(),
            noise_sigma: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_side < 2 {
            return Err(Error::invalid("grid_side", "N must be >= 2"));
        }
        finite_positive("area_side", self.area_side)?;
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
        }
        for s in &self.sources {
            let [x, y] = s.location;
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::NonFinite("source location"));
            }
            if x < 0.0 || y < 0.0 || x > self.area_side || y > self.area_side {
                return Err(Error::invalid(
                    "source.location",
                    format!("({x}, {y}) lies outside [0, {}]^2", self.area_side),
                ));
            }
            s.model.validate()?;
        }
        if self.shadowing.enabled {
            self.shadowing.validate()?;
        }
        Ok(())
    }

    /// Centre of cell `(i, j)` in meters.
    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.area_side / self.grid_side as f64;
        [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]
    }
}

/// Draw `count` sources uniformly from the central 80% of the area.
pub fn random_sources<R: Rng + ?Sized>(
    count: usize,
    area_side: f64,
    model: &SourceModel,
    rng: &mut R,
) -> Vec<SourceSpec> {
    let (lo, hi) = (0.1 * area_side, 0.9 * area_side);
    (0..count)
        .map(|_| SourceSpec {
            location: [rng.random_range(lo..hi), rng.random_range(lo..hi)],
            model: model.clone(),
        })
        .collect()
}

/// An `N x N` received-signal-strength matrix (linear scale).
#[derive(Clone, Debug, PartialEq)]
pub struct RadioMap {
    pub values: DMatrix<f64>,
    /// The spec that generated the map; `None` for reconstructions.
    pub spec: Option<FieldSpec>,
}

impl RadioMap {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch {
                expected: values.nrows(),
                rows: values.nrows(),
                cols: values.ncols(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("radio map"));
        }
        Ok(RadioMap { values, spec: None })
    }

    pub fn side(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, cell: Cell) -> f64 {
        self.values[cell]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    Measured,
    Interpolated,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Measured => "measured",
            Origin::Interpolated => "interpolated",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    pub origin: Origin,
}

impl Sample {
    pub fn cell(&self) -> Cell {
        (self.row, self.col)
    }
}

/// Observed grid entries with unique cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleSet {
    entries: Vec<Sample>,
}

impl SampleSet {
    pub fn new(entries: Vec<Sample>) -> Result<Self> {
        check_unique(entries.iter().map(Sample::cell))?;
        if entries.iter().any(|s| !s.value.is_finite()) {
            return Err(Error::NonFinite("sample value"));
        }
        Ok(SampleSet { entries })
    }

    pub fn entries(&self) -> &[Sample] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.entries.iter().map(Sample::cell)
    }

    pub fn measured(&self) -> impl Iterator<Item = &Sample> {
        self.entries
            .iter()
            .filter(|s| s.origin == Origin::Measured)
    }

    pub fn check_bounds(&self, n: usize) -> Result<()> {
        check_in_range(self.cells(), n)
    }

    /// Append entries from `other` whose cells are not already present.
    pub fn merge(&mut self, other: SampleSet) {
        let seen: HashSet<Cell> = self.cells().collect();
        self.entries
            .extend(other.entries.into_iter().filter(|s| !seen.contains(&s.cell())));
    }
}

pub(crate) fn check_in_range(cells: impl IntoIterator<Item = Cell>, n: usize) -> Result<()> {
    for (row, col) in cells {
        if row >= n || col >= n {
            return Err(Error::OutOfRange { row, col, n });
        }
    }
    Ok(())
}

pub(crate) fn check_unique(cells: impl IntoIterator<Item = Cell>) -> Result<()> {
    let mut seen = HashSet::new();
    for (row, col) in cells {
        if !seen.insert((row, col)) {
            return Err(Error::DuplicateCell { row, col });
        }
    }
    Ok(())
}

fn finite_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} must be finite and > 0")))
    }
}

/// Draws log10-shadowing fields. The Cholesky factor of the coarse-grid
/// covariance is computed once and reused across draws.
#[derive(Clone, Debug)]
pub struct ShadowingGenerator {
    resolution: usize,
    area_side: f64,
    factor: DMatrix<f64>,
}

impl ShadowingGenerator {
    pub fn new(spec: &ShadowingSpec, area_side: f64) -> Result<Self> {
        spec.validate()?;
        finite_positive("area_side", area_side)?;
        let g = spec.resolution;
        let h = area_side / g as f64;
        let centers: Vec<[f64; 2]> = (0..g * g)
            .map(|k| [((k / g) as f64 + 0.5) * h, ((k % g) as f64 + 0.5) * h])
            .collect();
        let cov = DMatrix::from_fn(g * g, g * g, |a, b| {
            let (p, q) = (centers[a], centers[b]);
            let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            spec.sigma_sq * (-d / spec.corr_distance).exp()
        });
        let factor = if spec.sigma_sq == 0.0 {
            DMatrix::zeros(g * g, g * g)
        } else {
            Cholesky::new(cov)
                .ok_or_else(|| Error::Decomposition("shadowing covariance is not positive definite".into()))?
                .unpack()
        };
        Ok(ShadowingGenerator {
            resolution: g,
            area_side,
            factor,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// A draw of the log10 field on the coarse `G x G` generator grid.
    pub fn sample_coarse<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let g = self.resolution;
        let z = DVector::from_fn(g * g, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = &self.factor * z;
        DMatrix::from_fn(g, g, |i, j| s[i * g + j])
    }

    /// A draw of the log10 field bilinearly interpolated to the `n x n`
    /// cell centres.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let coarse = self.sample_coarse(rng);
        upsample_bilinear(&coarse, self.area_side, n)
    }
}

/// Bilinear interpolation from coarse cell centres to fine cell centres,
/// clamping at the border.
fn upsample_bilinear(coarse: &DMatrix<f64>, area_side: f64, n: usize) -> DMatrix<f64> {
    let g = coarse.nrows();
    let coarse_h = area_side / g as f64;
    let fine_h = area_side / n as f64;
    let weights: Vec<(usize, f64)> = (0..n)
        .map(|i| {
            let t = (((i as f64 + 0.5) * fine_h) / coarse_h - 0.5).clamp(0.0, (g - 1) as f64);
            let i0 = (t.floor() as usize).min(g - 2);
            (i0, t - i0 as f64)
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        let (a, fa) = weights[i];
        let (b, fb) = weights[j];
        coarse[(a, b)] * (1.0 - fa) * (1.0 - fb)
            + coarse[(a + 1, b)] * fa * (1.0 - fb)
            + coarse[(a, b + 1)] * (1.0 - fa) * fb
            + coarse[(a + 1, b + 1)] * fa * fb
    })
}

/// Deterministic (shadowing-free) part of the map.
pub fn propagation_field(spec: &FieldSpec) -> DMatrix<f64> {
    let n = spec.grid_side;
    DMatrix::from_fn(n, n, |i, j| {
        let [cx, cy] = spec.cell_center(i, j);
        spec.sources
            .iter()
            .map(|s| s.model.gain(cx - s.location[0], cy - s.location[1]))
            .sum()
    })
}

pub fn build_ground_truth(spec: &FieldSpec) -> Result<RadioMap> {
    spec.validate()?;
    let generator = if spec.shadowing.enabled {
        Some(ShadowingGenerator::new(&spec.shadowing, spec.area_side)?)
    } else {
        None
    };
    build_ground_truth_with(spec, generator.as_ref())
}

/// [`build_ground_truth`] with a prebuilt shadowing generator. The generator
/// must have been built from `spec.shadowing` and `spec.area_side`; it is
/// ignored when shadowing is disabled.
pub fn build_ground_truth_with(
    spec: &FieldSpec,
    generator: Option<&ShadowingGenerator>,
) -> Result<RadioMap> {
    spec.validate()?;
    let mut values = propagation_field(spec);
    if spec.shadowing.enabled {
        let generator = generator
            .ok_or_else(|| Error::invalid("shadowing", "generator required when enabled"))?;
        let mut rng = rng::stream(spec.seed, &[label::SHADOWING]);
        let log_field = generator.sample(spec.grid_side, &mut rng);
        values.zip_apply(&log_field, |h, s| *h += 10f64.powf(s));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ground truth"));
    }
    Ok(RadioMap {
        values,
        spec: Some(spec.clone()),
    })
}

/// Noisy readings of `map` at `locations`.
pub fn measure(map: &RadioMap, locations: &[Cell], noise_sigma: f64, seed: u64) -> Result<SampleSet> {
    let mut rng = rng::stream(seed, &[label::MEASURE]);
    measure_with(map, locations, noise_sigma, &mut rng)
}

pub(crate) fn measure_with(
    map: &RadioMap,
    locations: &[Cell],
    noise_sigma: f64,
    rng: &mut StreamRng,
) -> Result<SampleSet> {
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
    }
    check_in_range(locations.iter().copied(), map.side())?;
    check_unique(locations.iter().copied())?;
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
    let entries = locations
        .iter()
        .map(|&(row, col)| {
            let eps = if noise_sigma > 0.0 { noise.sample(rng) } else { 0.0 };
            Sample {
                row,
                col,
                value: map.values[(row, col)] + eps,
                origin: Origin::Measured,
            }
        })
        .collect();
    Ok(SampleSet { entries })
}

/// Two Gaussian sources on the unit grid `x = y = 0..N-1`: one at the origin
/// and one at `(offset, offset)`. Each source contributes the rank-1 term
/// `alpha * exp(-beta (x_i - s)^2) * exp(-beta (y_j - s)^2)`.
pub fn gaussian_pair_field(offset: usize, beta: f64, alpha: f64, n: usize) -> Result<RadioMap> {
    if n < 3 || offset == 0 || offset >= n - 1 {
        return Err(Error::invalid(
            "offset",
            format!("need 0 < L1 < N-1, got L1={offset}, N={n}"),
        ));
    }
    finite_positive("beta", beta)?;
    finite_positive("alpha", alpha)?;
    let (u1, u2) = gaussian_pair_profiles(offset, beta, n);
    let values = (&u1 * u1.transpose() + &u2 * u2.transpose()) * alpha;
    RadioMap::new(values)
}

/// The two per-axis profiles `exp(-beta x^2)` and `exp(-beta (x - L1)^2)`.
pub fn gaussian_pair_profiles(offset: usize, beta: f64, n: usize) -> (DVector<f64>, DVector<f64>) {
    let l1 = offset as f64;
    let u1 = DVector::from_fn(n, |i, _| (-beta * (i as f64).powi(2)).exp());
    let u2 = DVector::from_fn(n, |i, _| (-beta * (i as f64 - l1).powi(2)).exp());
    (u1, u2)
}
