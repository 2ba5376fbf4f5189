//! Tapped-delay-line power-delay profiles (3GPP TR 38.901, Table 7.7.2).
//!
//! The five standard profiles ship as CSV data files embedded at compile
//! time; a checksum test pins their contents. Delays are dimensionless
//! ("normalized"): multiply by a scenario delay spread to get seconds. Tap
//! powers are given in dB and always used in sum-normalized linear form, so
//! every profile has unit average power. All taps — including the first taps
//! of TDL-D/E, which the standard models as Rician — fade as independent
//! Rayleigh processes here.

use alloc::string::String;
use alloc::vec::Vec;

use crate::flt;

pub const TDL_A_CSV: &str = include_str!("../data/tdl_a.csv");
pub const TDL_B_CSV: &str = include_str!("../data/tdl_b.csv");
pub const TDL_C_CSV: &str = include_str!("../data/tdl_c.csv");
pub const TDL_D_CSV: &str = include_str!("../data/tdl_d.csv");
pub const TDL_E_CSV: &str = include_str!("../data/tdl_e.csv");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TdlError {
    #[error("malformed tap table line: {0}")]
    Parse(String),
    #[error("invalid tap table: {0}")]
    Invalid(String),
    #[error("unknown TDL profile name: {0}")]
    UnknownProfile(String),
}

/// Identifier for one of the five standard profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TdlProfileId {
    TdlA,
    TdlB,
    TdlC,
    TdlD,
    TdlE,
}

impl TdlProfileId {
    pub const ALL: [TdlProfileId; 5] = [
        TdlProfileId::TdlA,
        TdlProfileId::TdlB,
        TdlProfileId::TdlC,
        TdlProfileId::TdlD,
        TdlProfileId::TdlE,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TdlProfileId::TdlA => "tdl-a",
            TdlProfileId::TdlB => "tdl-b",
            TdlProfileId::TdlC => "tdl-c",
            TdlProfileId::TdlD => "tdl-d",
            TdlProfileId::TdlE => "tdl-e",
        }
    }

    pub fn parse(name: &str) -> Result<Self, TdlError> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| TdlError::UnknownProfile(String::from(name)))
    }

    fn csv(self) -> &'static str {
        match self {
            TdlProfileId::TdlA => TDL_A_CSV,
            TdlProfileId::TdlB => TDL_B_CSV,
            TdlProfileId::TdlC => TDL_C_CSV,
            TdlProfileId::TdlD => TDL_D_CSV,
            TdlProfileId::TdlE => TDL_E_CSV,
        }
    }
}

impl core::fmt::Display for TdlProfileId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// One power-delay profile: parallel normalized-delay / tap-power lists.
#[derive(Debug, Clone, PartialEq)]
pub struct TdlProfile {
    pub normalized_delays: Vec<f64>,
    pub powers_db: Vec<f64>,
}

impl TdlProfile {
    /// Loads (parses) one of the embedded standard tables.
    pub fn load(id: TdlProfileId) -> TdlProfile {
        Self::parse_csv(id.csv()).expect("embedded TDL table must be valid")
    }

    /// Builds a custom profile (e.g. a single flat tap for tests/debugging).
    pub fn custom(normalized_delays: Vec<f64>, powers_db: Vec<f64>) -> Result<TdlProfile, TdlError> {
        let p = TdlProfile { normalized_delays, powers_db };
        p.validate()?;
        Ok(p)
    }

    pub fn parse_csv(text: &str) -> Result<TdlProfile, TdlError> {
        let mut delays = Vec::new();
        let mut powers = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let (d, p) = match (parts.next(), parts.next(), parts.next()) {
                (Some(d), Some(p), None) => (d.trim(), p.trim()),
                _ => return Err(TdlError::Parse(String::from(line))),
            };
            let d: f64 = d.parse().map_err(|_| TdlError::Parse(String::from(line)))?;
            let p: f64 = p.parse().map_err(|_| TdlError::Parse(String::from(line)))?;
            delays.push(d);
            powers.push(p);
        }
        let profile = TdlProfile { normalized_delays: delays, powers_db: powers };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), TdlError> {
        let err = |msg: &str| Err(TdlError::Invalid(String::from(msg)));
        if self.normalized_delays.is_empty() {
            return err("profile must have at least one tap");
        }
        if self.normalized_delays.len() != self.powers_db.len() {
            return err("delay and power lists must have equal length");
        }
        if self.normalized_delays[0] != 0.0 {
            return err("first tap delay must be 0");
        }
        if self.normalized_delays.iter().any(|&d| !(d.is_finite() && d >= 0.0)) {
            return err("tap delays must be finite and non-negative");
        }
        if self.powers_db.iter().any(|&p| !p.is_finite()) {
            return err("tap powers must be finite");
        }
        Ok(())
    }

    pub fn num_taps(&self) -> usize {
        self.normalized_delays.len()
    }

    /// Linear tap powers normalized to sum to exactly (up to fp) one.
    pub fn normalized_linear_powers(&self) -> Vec<f64> {
        let linear: Vec<f64> = self.powers_db.iter().map(|&db| flt::db_to_linear(db)).collect();
        let total: f64 = linear.iter().sum();
        linear.into_iter().map(|p| p / total).collect()
    }
}
