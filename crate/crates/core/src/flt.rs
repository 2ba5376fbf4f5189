//! Float math shims: inherent `f64` methods under `std`, `libm` otherwise.
//!
//! Only the handful of transcendentals the crate actually uses are shimmed.

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline]
    pub fn sin(x: f64) -> f64 {
        x.sin()
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn ceil(x: f64) -> f64 {
        x.ceil()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn ceil(x: f64) -> f64 {
        libm::ceil(x)
    }
}

pub use imp::{ceil, cos, exp, ln, sin, sqrt};

/// `ceil(x)` as a usize; callers guarantee `x` is finite and non-negative.
#[inline]
pub fn ceil_usize(x: f64) -> usize {
    ceil(x) as usize
}

use num_complex::Complex64;

/// e^{j theta}.
#[inline]
pub fn cis(theta: f64) -> Complex64 {
    Complex64::new(cos(theta), sin(theta))
}

/// 10^(db/10), the linear power for a dB value.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    exp(db * (core::f64::consts::LN_10 / 10.0))
}

/// 10 log10(x), the dB value for a linear power.
#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * ln(x) / core::f64::consts::LN_10
}
