//! Random streams and reproducible seed derivation.
//!
//! Every replicate owns a private [`RandomStream`]. Replicate `i` of an
//! experiment with master seed `s` is seeded with
//! `splitmix64_mix(s + i * 0x9E3779B97F4A7C15)` (wrapping arithmetic), so
//! results do not depend on how replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random number generator used throughout the crate.
pub type RandomStream = ChaCha8Rng;

/// Golden-ratio increment of the SplitMix64 generator.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64_mix(x: u64) -> u64 {
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under `master_seed`.
pub fn replicate_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64_mix(master_seed.wrapping_add(index.wrapping_mul(GOLDEN_GAMMA)))
}

/// A fresh stream for replicate `index`.
pub fn replicate_stream(master_seed: u64, index: u64) -> RandomStream {
    RandomStream::seed_from_u64(replicate_seed(master_seed, index))
}

/// A stream seeded directly from `seed`.
pub fn stream_from_seed(seed: u64) -> RandomStream {
    RandomStream::seed_from_u64(seed)
}
