//! Configuration-driven benchmark sweeps and theory trace export.

pub mod config;
pub mod experiment;
pub mod report;
pub mod theory;

pub use config::{
    ConfigMap, ExperimentConfig, FieldTemplate, Method, Scheme, SourcePlacement, Sweep, SweepAxis,
    TheoryConfig, TheoryKind, KNOWN_KEYS,
};
pub use experiment::{matrix_hash, measurement_seed, run_experiment, truth_seed};
pub use report::{NmseReport, RowStatus, SummaryRow, TrialRow};
pub use theory::run_theory;
