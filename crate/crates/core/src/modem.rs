//! 16QAM mapping/demapping (Gray-coded per axis) and one-tap equalizers.
//!
//! A symbol index packs four bits `b0 b1 b2 b3` (b0 most significant); the
//! first two select the in-phase level, the last two the quadrature level.
//! Per-axis Gray code: `00 -> -3`, `01 -> -1`, `11 -> +1`, `10 -> +3`,
//! scaled by `1/sqrt(10)` for unit average symbol energy.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand_chacha::rand_core::RngCore;

use crate::flt;
use crate::rng;

/// Number of constellation points.
pub const QAM16_POINTS: usize = 16;

#[inline]
fn axis_from_bits(hi: u8, lo: u8) -> f64 {
    match (hi, lo) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0, // (1, 0)
    }
}

#[inline]
fn axis_to_bits(level: f64) -> (u8, u8) {
    if level < 0.0 {
        if level < -2.0 {
            (0, 0)
        } else {
            (0, 1)
        }
    } else if level < 2.0 {
        (1, 1)
    } else {
        (1, 0)
    }
}

/// Maps a 4-bit symbol index to its unit-energy constellation point.
#[inline]
pub fn qam16_map(index: u8) -> Complex64 {
    debug_assert!(index < 16);
    let scale = 1.0 / flt::sqrt(10.0);
    let i = axis_from_bits((index >> 3) & 1, (index >> 2) & 1);
    let q = axis_from_bits((index >> 1) & 1, index & 1);
    Complex64::new(i * scale, q * scale)
}

/// Hard nearest-point demapping back to the 4-bit symbol index.
#[inline]
pub fn qam16_demap(z: Complex64) -> u8 {
    let scale = flt::sqrt(10.0);
    let (b0, b1) = axis_to_bits(z.re * scale);
    let (b2, b3) = axis_to_bits(z.im * scale);
    (b0 << 3) | (b1 << 2) | (b2 << 1) | b3
}

/// MMSE one-tap equalizer: `x_hat = conj(h) y / (|h|^2 + sigma2)`. A dead
/// RE (`h = 0` and `sigma2 = 0`) equalizes to zero.
#[inline]
pub fn mmse_equalize(y: Complex64, h: Complex64, sigma2: f64) -> Complex64 {
    let denom = h.norm_sqr() + sigma2;
    if denom == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        h.conj() * y / denom
    }
}

/// Zero-forcing equalizer: MMSE with the noise term dropped.
#[inline]
pub fn zf_equalize(y: Complex64, h: Complex64) -> Complex64 {
    mmse_equalize(y, h, 0.0)
}

/// Draws `count` uniform 4-bit symbol indices.
pub fn random_symbols<R: RngCore>(rng: &mut R, count: usize) -> Vec<u8> {
    (0..count).map(|_| rng::uniform_index(rng, QAM16_POINTS) as u8).collect()
}

/// Fraction of positions whose demapped index differs.
pub fn symbol_error_rate(sent: &[u8], received: &[u8]) -> f64 {
    debug_assert_eq!(sent.len(), received.len());
    if sent.is_empty() {
        return 0.0;
    }
    let errors = sent.iter().zip(received).filter(|(a, b)| a != b).count();
    errors as f64 / sent.len() as f64
}
