//! Chain-local random number generation.
//!
//! Every chain owns a [`ChainRng`] seeded from a single `u64`. ChaCha8 output is
//! specified independently of platform and word size, so a seed reproduces the
//! same stream everywhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of chain `chain` in run `run` from a master seed.
///
/// `(run, chain)` is packed into one word (`run << 32 | chain`), offset by the
/// golden-ratio multiple of the master seed and passed through [`mix64`]. For a
/// fixed master seed the map is injective over all `run, chain < 2^32`.
pub fn seed_split(master_seed: u64, run: u32, chain: u32) -> u64 {
    let packed = ((run as u64) << 32) | chain as u64;
    mix64(packed.wrapping_add(master_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}
