//! Seed plumbing.
//!
//! Every sampling entry point in the crate takes an explicit `u64` seed and
//! builds its own [`ChaCha8Rng`] stream, so parallel callers never share RNG
//! state and results are reproducible across platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Construct the RNG stream for a seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive the seed for substream `index` of a master seed.
///
/// SplitMix64 finalizer over `master + (index + 1) * golden`, so substreams of
/// one master and of nearby masters are decorrelated.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
