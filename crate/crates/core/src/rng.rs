//! Reproducible random number streams.
//!
//! Every stochastic routine takes an explicit generator. Streams are
//! ChaCha8 seeded from a 64-bit value, which gives bit-identical output on
//! every platform. Independent sub-streams (one per parameter point, per
//! replicate, per model...) are obtained with [`derive_seed`], a SplitMix64
//! finalizer folded over the base seed and the work-item indices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Seeds a fresh generator.
pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed for the work item identified by `path`.
///
/// Distinct paths give statistically independent streams; the same
/// `(base, path)` always yields the same seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(base);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

/// Convenience: a generator for the work item `path` under `base`.
pub fn child_rng(base: u64, path: &[u64]) -> SimRng {
    rng_from_seed(derive_seed(base, path))
}
