//! Seeded random streams.
//!
//! Every stochastic routine in the crate draws from [`SeededRng`], which is
//! Xoshiro256++ seeded through SplitMix64 (`rand_xoshiro`'s `seed_from_u64`).
//! Independent streams for replications, shuffles and studies are derived as
//! `base_seed + index` (wrapping), so any single replication can be
//! regenerated in isolation.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SeededRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> SeededRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Stream for the `index`-th task under `base`.
pub fn derived(base: u64, index: u64) -> SeededRng {
    seeded(base.wrapping_add(index))
}

/// SplitMix64 finaliser. Used to turn a user seed into a base for
/// `base + index` streams when neighbouring user seeds must not share
/// streams.
pub fn scramble(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fixed-point threshold for a Bernoulli(p) draw against a raw `u64`:
/// `next_u64() < threshold(p)` has probability `p` up to 2^-64.
pub(crate) fn threshold(p: f64) -> u64 {
    if p <= 0.0 {
        0
    } else if p >= 1.0 {
        u64::MAX
    } else {
        // 2^64 * p, exact for the 53-bit mantissa
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}
