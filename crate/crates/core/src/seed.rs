//! Stable seed derivation. Every random stream in the toolkit is keyed by a
//! 64-bit value obtained here, so parallel workers never share RNG state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine a parent seed with a child key (sample index, ping index, stage tag).
#[inline]
pub fn derive(parent: u64, key: u64) -> u64 {
    mix64(mix64(parent) ^ key.rotate_left(17) ^ 0xD6E8_FEB8_6659_FD93)
}

/// Per-stage keys used inside one sample.
pub mod stage {
    pub const PLACEMENT: u64 = 0x706c_6163;
    pub const SPECKLE: u64 = 0x7370_6563;
    pub const FIELD: u64 = 0x6669_656c;
    pub const TERRAIN: u64 = 0x7465_7272;
    pub const SPLIT: u64 = 0x7370_6c69;
    pub const SEABED: u64 = 0x7365_6162;
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
