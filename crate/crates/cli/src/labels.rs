//! Encoding of the noise-power training label.
//!
//! The noise head regresses a scalar per sample; how the physical noise power
//! `sigma^2` maps to that scalar is a training-time choice recorded in the
//! checkpoint so evaluation inverts it consistently.

use serde::{Deserialize, Serialize};

/// How `sigma^2` is presented to (and recovered from) the noise head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLabelMode {
    /// Label is the linear noise power itself; predictions clamp at zero.
    #[default]
    LinearPower,
    /// Label is the noise power in dB (`10 log10 sigma^2`, i.e. `-SNR`);
    /// predictions invert through `10^(x/10)`.
    Db,
}

impl NoiseLabelMode {
    pub fn name(self) -> &'static str {
        match self {
            NoiseLabelMode::LinearPower => "linear_power",
            NoiseLabelMode::Db => "db",
        }
    }

    /// Physical noise power -> regression target.
    pub fn encode(self, sigma2: f64) -> f64 {
        match self {
            NoiseLabelMode::LinearPower => sigma2,
            // Floor keeps noiseless samples finite (-300 dB).
            NoiseLabelMode::Db => 10.0 * sigma2.max(1e-30).log10(),
        }
    }

    /// Raw noise-head output -> physical noise power (non-negative).
    pub fn decode(self, raw: f64) -> f64 {
        match self {
            NoiseLabelMode::LinearPower => raw.max(0.0),
            NoiseLabelMode::Db => 10f64.powf(raw / 10.0),
        }
    }
}

impl std::fmt::Display for NoiseLabelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Training target for a sample with true noise power `sigma2`, honoring the
/// model's `noise_label_scale` multiplier (applied before the mode mapping).
pub fn encode_noise(mode: NoiseLabelMode, scale: f64, sigma2: f64) -> f64 {
    mode.encode(sigma2 * scale)
}

/// Physical noise power recovered from a raw noise-head output; exact inverse
/// of [`encode_noise`] wherever that is invertible.
pub fn decode_noise(mode: NoiseLabelMode, scale: f64, raw: f64) -> f64 {
    mode.decode(raw) / scale
}
