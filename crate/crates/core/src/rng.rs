//! Seed derivation and random draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed. For a fixed master seed the map `(n, trial) -> seed` is
/// injective whenever both `n` and `trial` fit in 32 bits.
pub fn trial_seed(master: u64, n: usize, trial: usize) -> u64 {
    let packed = ((n as u64 & 0xffff_ffff) << 32) | (trial as u64 & 0xffff_ffff);
    mix64(packed ^ mix64(master))
}

/// Independent sub-stream derived from a seed, e.g. for initialization vs noise.
pub fn substream(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
