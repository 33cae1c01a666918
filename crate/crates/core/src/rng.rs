//! Portable random streams.
//!
//! All randomness goes through xoshiro256++ seeded by SplitMix64 (the
//! reference seeding procedure for the xoshiro family). Floats are derived
//! from the top 53 bits of `next_u64`, so a given seed yields the same values
//! on every platform and in any language that implements the two generators.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};

pub type SpecRng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> SpecRng {
    SpecRng::seed_from_u64(seed)
}

/// Independent seed for stream `index` derived from `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut sm = SplitMix64::seed_from_u64(master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    sm.next_u64()
}

/// Uniform in [0, 1).
#[inline]
pub fn unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in [lo, hi).
#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

/// Uniform integer in [lo, hi] (inclusive).
#[inline]
pub fn uniform_int<R: RngCore + ?Sized>(rng: &mut R, lo: usize, hi: usize) -> usize {
    debug_assert!(lo <= hi);
    let span = (hi - lo + 1) as f64;
    lo + ((unit(rng) * span) as usize).min(hi - lo)
}

/// Fisher-Yates shuffle driven by [`uniform_int`].
pub fn shuffle<T, R: RngCore + ?Sized>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = uniform_int(rng, 0, i);
        items.swap(i, j);
    }
}
