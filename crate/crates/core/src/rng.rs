//! Counter-based random streams.
//!
//! Every random decision in a simulation is keyed by `(seed, a, b, purpose)`,
//! e.g. `(replicate seed, day, node, INFECTION)`. Two runs that differ only in
//! network structure therefore draw identical numbers wherever the decision
//! itself exists in both runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub mod purpose {
    pub const SEEDS: u64 = 1;
    pub const SEED_TAU: u64 = 2;
    pub const INFECTION: u64 = 3;
    pub const TAU: u64 = 4;
    pub const DETECT: u64 = 5;
    pub const RING: u64 = 6;
    pub const TIMELINE: u64 = 7;
    pub const LAMBDA: u64 = 8;
    pub const NEIGHBOURS: u64 = 9;
    pub const MASS: u64 = 10;
    pub const RANKING: u64 = 11;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes the key into a single 64-bit seed.
pub fn mix(seed: u64, a: u64, b: u64, purpose: u64) -> u64 {
    let mut h = splitmix64(seed ^ 0x5350_4454);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b.rotate_left(17));
    splitmix64(h ^ purpose.rotate_left(41))
}

pub fn stream(seed: u64, a: u64, b: u64, purpose: u64) -> StreamRng {
    StreamRng::seed_from_u64(mix(seed, a, b, purpose))
}
