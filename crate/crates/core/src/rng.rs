//! Seeding contract.
//!
//! Every random object is drawn from a [`ChaCha8Rng`] whose 64-bit seed is
//! derived with the SplitMix64 finalizer. Per-sample seeds are
//! `mix(master, index)`, so a Monte Carlo estimate depends only on the master
//! seed and the sample count, never on how samples are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

/// Identifier recorded in run metadata.
pub const GENERATOR_ID: &str = "chacha8/splitmix64-mix/geometric-skip-v1";

/// SplitMix64 finalizer.
#[inline]
pub fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for sample `index` of a run keyed by `master`.
#[inline]
pub fn mix(master: u64, index: u64) -> u64 {
    avalanche(avalanche(master).wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)) ^ 0x5851_f42d_4c95_7f2d)
}

pub fn rng_from_seed(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(avalanche(seed))
}

/// Uniform draw in the open interval `(0, 1)`.
#[inline]
pub fn open01<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    // 53 random bits shifted by half an ulp: never 0, never 1.
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
