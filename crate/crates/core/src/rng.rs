//! Deterministic RNG stream derivation.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded by
//! mixing a master seed with a small tuple of stream labels, so results do
//! not depend on evaluation order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix `master` with `labels` into a new 64-bit seed.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(master), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn stream(master: u64, labels: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, labels))
}

/// Stream labels used across modules.
pub mod label {
    pub const SOURCES: u64 = 0x50;
    pub const SHADOWING: u64 = 0x53;
    pub const ROUND_ONE: u64 = 0x31;
    pub const ROUND_TWO: u64 = 0x32;
    pub const NOISE_ONE: u64 = 0x4e31;
    pub const NOISE_TWO: u64 = 0x4e32;
    pub const TRUTH: u64 = 0x54;
    pub const MEASURE: u64 = 0x4d;
}
