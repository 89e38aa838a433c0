//! Deterministic seed derivation.
//!
//! Every random stream in a run is addressed by a tuple of integers
//! (`master seed`, stream tag, iteration, index, ...) folded through the
//! SplitMix64 finalizer. Streams are then drawn from ChaCha8, which is
//! counter-based and produces the same values on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Distinct tags keep the derived streams disjoint.
pub mod stream {
    pub const GRADIENT: u64 = 0x6772_6164;
    pub const RETRY: u64 = 0x7265_7472;
    pub const FRAME: u64 = 0x6672_616d;
    pub const RADII: u64 = 0x7261_6469;
    pub const REPORT: u64 = 0x7265_706f;
    pub const INIT: u64 = 0x696e_6974;
    pub const NODE: u64 = 0x6e6f_6465;
    pub const SAMPLE: u64 = 0x7361_6d70;
    pub const ENV: u64 = 0x656e_7673;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `base`. Order matters: `derive(s, &[1, 2]) != derive(s, &[2, 1])`.
pub fn derive(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(GOLDEN))))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
