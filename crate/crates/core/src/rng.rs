//! Seed derivation and primitive random draws.
//!
//! All randomness in the workbench flows through `ChaCha8Rng` streams whose
//! seeds are derived from a single master seed with [`derive_seed`]. The
//! derivation is pure integer mixing (SplitMix64), so independent work items
//! (dataset samples, fading taps, BLER blocks) can be computed in any order —
//! including in parallel — without changing results.

use num_complex::Complex64;
use rand_chacha::rand_core::RngCore;

use crate::flt;

/// Domain-separation salts for [`derive_seed`]. Each independent consumer of
/// the master seed uses its own salt so streams never collide.
pub mod salt {
    pub const DATASET_SAMPLE: u64 = 1;
    pub const PILOT_PATTERN: u64 = 2;
    pub const CHANNEL_TAP: u64 = 3;
    pub const TRAIN_SHUFFLE: u64 = 4;
    pub const MODEL_INIT: u64 = 5;
    pub const BLER_BLOCK: u64 = 6;
}

/// SplitMix64 finalizer (Steele, Lea, Flood 2014). Bijective on `u64`.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from `(master, salt, index)`.
#[inline]
pub fn derive_seed(master: u64, salt: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ salt) ^ index)
}

/// Uniform draw in `[0, 1)` with 53 random mantissa bits.
#[inline]
pub fn uniform_f64<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `[lo, hi)` (degenerate ranges return `lo`).
#[inline]
pub fn uniform_range<R: RngCore>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform_f64(rng)
}

/// Uniform index in `0..len`. `len` must be nonzero.
#[inline]
pub fn uniform_index<R: RngCore>(rng: &mut R, len: usize) -> usize {
    debug_assert!(len > 0);
    let i = (uniform_f64(rng) * len as f64) as usize;
    i.min(len - 1)
}

/// One pair of independent standard normal draws (Box–Muller).
#[inline]
pub fn standard_normal_pair<R: RngCore>(rng: &mut R) -> (f64, f64) {
    // 1 - u in (0, 1] keeps the logarithm finite.
    let u1 = 1.0 - uniform_f64(rng);
    let u2 = uniform_f64(rng);
    let r = flt::sqrt(-2.0 * flt::ln(u1));
    let theta = core::f64::consts::TAU * u2;
    (r * flt::cos(theta), r * flt::sin(theta))
}

/// Circularly-symmetric complex Gaussian draw with total variance `variance`
/// (split equally across real and imaginary parts).
#[inline]
pub fn complex_normal<R: RngCore>(rng: &mut R, variance: f64) -> Complex64 {
    if variance == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let (a, b) = standard_normal_pair(rng);
    let s = flt::sqrt(variance * 0.5);
    Complex64::new(a * s, b * s)
}
