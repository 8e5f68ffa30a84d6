//! Radio map construction from sparse received-signal-strength measurements.
//!
//! The crate covers the whole pipeline: simulating ground-truth maps
//! ([`field`]), computing leverage scores of a (rough) map estimate
//! ([`leverage`]), designing where to measure or interpolate
//! ([`sampling`]), reconstructing the map by singular value thresholding
//! ([`completion`]), numerically checking the pseudo-image and consistency
//! behaviour of leverage probabilities ([`theory`]), and running seeded
//! Monte Carlo benchmarks ([`bench`]).

pub mod bench;
pub mod completion;
pub mod error;
pub mod field;
pub mod io;
pub mod leverage;
pub mod rng;
pub mod sampling;
pub mod theory;

pub use error::{Error, Result};
pub use field::{Cell, FieldSpec, Origin, RadioMap, Sample, SampleSet};
