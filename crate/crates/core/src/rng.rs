//! Derivation of independent, reproducible random streams from a base
//! seed and integer indices, so Monte Carlo repeats and measurement
//! settings stay decorrelated and order-independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; a bijective mixer on 64-bit words.
pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// A stream keyed by `(seed, lane, index)`: lanes separate subsystems,
/// indices separate repeats or settings within one subsystem.
pub(crate) fn derive_stream(seed: u64, lane: u64, index: u64) -> ChaCha8Rng {
    let mut key = splitmix64(seed ^ splitmix64(lane));
    key = splitmix64(key.wrapping_add(splitmix64(index)));
    ChaCha8Rng::seed_from_u64(key)
}
