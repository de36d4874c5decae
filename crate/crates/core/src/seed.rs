//! Deterministic seed derivation for Monte Carlo trials.
//!
//! `derive_seed(master, index)` is `mix(mix(master) + index * PHI)` where
//! `mix` is the SplitMix64 finalizer and `PHI = 0x9E37_79B9_7F4A_7C15`. All
//! arithmetic is on `u64` with wrapping semantics, so the result does not
//! depend on platform endianness. For a fixed master seed the map is a
//! bijection of the index (odd multiplier followed by a bijective mixer), so
//! distinct trial indices never collide.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PHI: u64 = 0x9E37_79B9_7F4A_7C15;

/// The RNG used for every simulation stream.
pub type SimRng = ChaCha8Rng;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master).wrapping_add(index.wrapping_mul(PHI)))
}

/// RNG for trial `index` of an experiment seeded with `master`.
pub fn trial_rng(master: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, index))
}

/// Independent sub-stream of a trial, e.g. one per processing stage.
pub fn stage_rng(master: u64, index: u64, stage: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(derive_seed(master, index), stage))
}
