//! Fading-channel synthesis and noisy observation of a resource grid.
//!
//! A channel realization is the analytic frequency response of a tapped
//! delay line over the grid:
//!
//! ```text
//! h[m, n] = sum_l g_l(t_n) * exp(-j 2 pi f_m tau_l)
//! ```
//!
//! with `tau_l` the profile's normalized delay scaled by the scenario delay
//! spread, `f_m = (m - M/2) * scs` the subcarrier frequency relative to band
//! center, and `t_n` the midpoint time of symbol `n`. Each tap gain `g_l(t)`
//! is an independent Rayleigh process produced by a Gaussian-weighted Jakes
//! sum of [`JAKES_SINUSOIDS`] sinusoids, giving `E[g_l(t) g_l*(t+d)] = p_l *
//! J0(2 pi f_D d)` and `sum_l p_l = 1`.
//!
//! Observation model per RE: `y = h * x + w`, `w ~ CN(0, sigma^2)`,
//! `sigma^2 = 10^(-SNR/10)` against unit signal power.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::estimators::{interpolate_2d, ls_at_pilots, EstimatorError};
use crate::flt;
use crate::grid::{GridConfig, GridError, PilotPattern, ResourceGrid};
use crate::rng;
use crate::tdl::{TdlError, TdlProfile, TdlProfileId};

/// Sinusoids per tap in the Jakes sum-of-sinusoids fading model.
pub const JAKES_SINUSOIDS: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChanError {
    #[error("invalid channel params: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Tdl(#[from] TdlError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Scenario description for one channel realization.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelParams {
    pub profile: TdlProfileId,
    /// Delay spread in seconds (scales the profile's normalized delays).
    pub delay_spread_s: f64,
    /// Maximum Doppler shift in Hz.
    pub doppler_hz: f64,
    /// Per-RE SNR in dB against unit signal power.
    pub snr_db: f64,
    /// Seed for the fading process.
    pub seed: u64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChanError> {
        let err = |m: &str| Err(ChanError::InvalidParams(String::from(m)));
        if !(self.delay_spread_s.is_finite() && self.delay_spread_s >= 0.0) {
            return err("delay_spread_s must be finite and >= 0");
        }
        if !(self.doppler_hz.is_finite() && self.doppler_hz >= 0.0) {
            return err("doppler_hz must be finite and >= 0");
        }
        if self.snr_db.is_nan() {
            return err("snr_db must not be NaN");
        }
        Ok(())
    }

    /// Linear noise power `10^(-snr/10)`.
    pub fn sigma2(&self) -> f64 {
        flt::db_to_linear(-self.snr_db)
    }
}

/// How per-sample SNR values are drawn.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", deny_unknown_fields))]
pub enum SnrSpec {
    /// Uniform over the discrete grid `start + step * {0 .. count-1}` dB.
    Grid { start_db: f64, step_db: f64, count: usize },
    /// Continuous uniform over `[min_db, max_db]`.
    Uniform { min_db: f64, max_db: f64 },
    /// Every sample uses the same SNR (degenerate; also the noiseless debug
    /// hook: a huge value like 9999 dB underflows to sigma^2 = 0 exactly).
    Fixed { snr_db: f64 },
}

impl Default for SnrSpec {
    /// The 13-value grid {-5, -3, ..., 19} dB.
    fn default() -> Self {
        SnrSpec::Grid { start_db: -5.0, step_db: 2.0, count: 13 }
    }
}

impl SnrSpec {
    pub fn validate(&self) -> Result<(), ChanError> {
        let err = |m: &str| Err(ChanError::InvalidParams(String::from(m)));
        match *self {
            SnrSpec::Grid { start_db, step_db, count } => {
                if !start_db.is_finite() || !step_db.is_finite() {
                    return err("snr grid bounds must be finite");
                }
                if count == 0 {
                    return err("snr grid count must be >= 1");
                }
            }
            SnrSpec::Uniform { min_db, max_db } => {
                if !(min_db.is_finite() && max_db.is_finite() && min_db <= max_db) {
                    return err("snr uniform range must be finite with min <= max");
                }
            }
            SnrSpec::Fixed { snr_db } => {
                if snr_db.is_nan() {
                    return err("snr_db must not be NaN");
                }
            }
        }
        Ok(())
    }

    pub fn draw<R: RngCore>(&self, rng: &mut R) -> f64 {
        match *self {
            SnrSpec::Grid { start_db, step_db, count } => {
                start_db + step_db * rng::uniform_index(rng, count) as f64
            }
            SnrSpec::Uniform { min_db, max_db } => rng::uniform_range(rng, min_db, max_db),
            SnrSpec::Fixed { snr_db } => snr_db,
        }
    }

    /// The discrete values a `Grid` spec can produce (empty for other kinds).
    pub fn grid_values(&self) -> Vec<f64> {
        match *self {
            SnrSpec::Grid { start_db, step_db, count } => {
                (0..count).map(|i| start_db + step_db * i as f64).collect()
            }
            _ => Vec::new(),
        }
    }
}

/// Scenario ranges from which [`sample_params`] draws.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ParamRanges {
    pub profiles: Vec<TdlProfileId>,
    /// Delay spread range in nanoseconds, inclusive.
    pub delay_spread_ns: (f64, f64),
    /// Doppler range in Hz, inclusive.
    pub doppler_hz: (f64, f64),
    pub snr: SnrSpec,
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            profiles: TdlProfileId::ALL.to_vec(),
            delay_spread_ns: (1.0, 300.0),
            doppler_hz: (5.0, 250.0),
            snr: SnrSpec::default(),
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<(), ChanError> {
        let err = |m: &str| Err(ChanError::InvalidParams(String::from(m)));
        if self.profiles.is_empty() {
            return err("profiles must not be empty");
        }
        let ok_range = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi;
        if !ok_range(self.delay_spread_ns) {
            return err("delay_spread_ns must satisfy 0 <= lo <= hi");
        }
        if !ok_range(self.doppler_hz) {
            return err("doppler_hz must satisfy 0 <= lo <= hi");
        }
        self.snr.validate()
    }

    /// Fixes every range to a single scenario point.
    pub fn fixed(profile: TdlProfileId, delay_spread_ns: f64, doppler_hz: f64, snr_db: f64) -> Self {
        ParamRanges {
            profiles: vec![profile],
            delay_spread_ns: (delay_spread_ns, delay_spread_ns),
            doppler_hz: (doppler_hz, doppler_hz),
            snr: SnrSpec::Fixed { snr_db },
        }
    }
}

/// Draws one scenario from the ranges. Draw order (profile, delay spread,
/// Doppler, SNR, fading seed) is part of the determinism contract.
pub fn sample_params<R: RngCore>(rng: &mut R, ranges: &ParamRanges) -> Result<ChannelParams, ChanError> {
    ranges.validate()?;
    let profile = ranges.profiles[rng::uniform_index(rng, ranges.profiles.len())];
    let ds_ns = rng::uniform_range(rng, ranges.delay_spread_ns.0, ranges.delay_spread_ns.1);
    let doppler_hz = rng::uniform_range(rng, ranges.doppler_hz.0, ranges.doppler_hz.1);
    let snr_db = ranges.snr.draw(rng);
    let seed = rng.next_u64();
    let params =
        ChannelParams { profile, delay_spread_s: ds_ns * 1e-9, doppler_hz, snr_db, seed };
    params.validate()?;
    Ok(params)
}

/// One realized channel over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: ResourceGrid,
    pub sigma2: f64,
}

/// Synthesizes the frequency response for `params` over `config`'s grid,
/// looking the profile up by id.
pub fn synth_channel(params: &ChannelParams, config: &GridConfig) -> Result<ChannelRealization, ChanError> {
    let profile = TdlProfile::load(params.profile);
    synth_channel_with_profile(params, &profile, config)
}

/// Same as [`synth_channel`] but with an explicit (possibly custom) profile.
pub fn synth_channel_with_profile(
    params: &ChannelParams,
    profile: &TdlProfile,
    config: &GridConfig,
) -> Result<ChannelRealization, ChanError> {
    params.validate()?;
    profile.validate()?;
    config.validate()?;

    let m_count = config.num_subcarriers();
    let n_count = config.num_symbols;
    let l_count = profile.num_taps();
    let powers = profile.normalized_linear_powers();
    let t_sym = config.symbol_duration_s();

    // Per-tap gains over symbol times: Jakes sum of sinusoids. Each tap gets
    // its own substream so tap count never shifts another tap's draws.
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let mut gains = vec![Complex64::new(0.0, 0.0); l_count * n_count];
    for l in 0..l_count {
        let tap_seed = master.next_u64();
        let mut tap_rng = ChaCha8Rng::seed_from_u64(tap_seed);
        let mut amps = [Complex64::new(0.0, 0.0); JAKES_SINUSOIDS];
        let mut omegas = [0.0f64; JAKES_SINUSOIDS];
        let mut phases = [0.0f64; JAKES_SINUSOIDS];
        for k in 0..JAKES_SINUSOIDS {
            let (a, b) = rng::standard_normal_pair(&mut tap_rng);
            amps[k] = Complex64::new(a, b);
            let alpha = core::f64::consts::TAU * rng::uniform_f64(&mut tap_rng);
            omegas[k] = core::f64::consts::TAU * params.doppler_hz * flt::cos(alpha);
            phases[k] = core::f64::consts::TAU * rng::uniform_f64(&mut tap_rng);
        }
        let scale = flt::sqrt(powers[l] / (2.0 * JAKES_SINUSOIDS as f64));
        for n in 0..n_count {
            let t = (n as f64 + 0.5) * t_sym;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..JAKES_SINUSOIDS {
                acc += amps[k] * flt::cis(omegas[k] * t + phases[k]);
            }
            gains[l * n_count + n] = scale * acc;
        }
    }

    // Frequency twiddles exp(-j 2 pi f_m tau_l), f_m relative to band center.
    let mut twiddle = vec![Complex64::new(0.0, 0.0); m_count * l_count];
    for (l, &d) in profile.normalized_delays.iter().enumerate() {
        let tau = d * params.delay_spread_s;
        for m in 0..m_count {
            let f_m = (m as f64 - m_count as f64 / 2.0) * config.scs_hz;
            twiddle[m * l_count + l] = flt::cis(-core::f64::consts::TAU * f_m * tau);
        }
    }

    let mut h = ResourceGrid::zeros(m_count, n_count);
    {
        let slice = h.as_mut_slice();
        for m in 0..m_count {
            let tw = &twiddle[m * l_count..(m + 1) * l_count];
            for n in 0..n_count {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..l_count {
                    acc += gains[l * n_count + n] * tw[l];
                }
                slice[m * n_count + n] = acc;
            }
        }
    }

    Ok(ChannelRealization { h, sigma2: params.sigma2() })
}

/// Applies the channel and AWGN: `y = h .* x + w`. Noise is drawn RE by RE
/// in subcarrier-major order from `rng`.
pub fn apply_channel<R: RngCore>(
    tx: &ResourceGrid,
    channel: &ChannelRealization,
    rng: &mut R,
) -> Result<ResourceGrid, ChanError> {
    if tx.num_subcarriers() != channel.h.num_subcarriers()
        || tx.num_symbols() != channel.h.num_symbols()
    {
        return Err(ChanError::InvalidParams(String::from(
            "tx grid and channel dimensions differ",
        )));
    }
    let mut rx = tx.clone();
    let h = channel.h.as_slice();
    let out = rx.as_mut_slice();
    for i in 0..out.len() {
        out[i] = h[i] * out[i] + rng::complex_normal(rng, channel.sigma2);
    }
    Ok(rx)
}

/// One dataset record: noisy interpolated LS estimate as model input, the
/// true response and noise power as labels. Tensors are `M x N x 2` f32,
/// subcarrier-major (re/im innermost) — the same order as graph node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f32>,
    pub label_h: Vec<f32>,
    pub label_noise: f32,
}

/// Provenance of one sample, recorded in the dataset manifest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleMeta {
    pub profile: TdlProfileId,
    pub delay_spread_ns: f64,
    pub doppler_hz: f64,
    pub snr_db: f64,
    pub seed: u64,
}

fn grid_to_f32(grid: &ResourceGrid) -> Vec<f32> {
    let mut out = Vec::with_capacity(grid.as_slice().len() * 2);
    for z in grid.as_slice() {
        out.push(z.re as f32);
        out.push(z.im as f32);
    }
    out
}

/// Scenario, realized channel, and noisy received pilot grid for one sample
/// seed — everything upstream of estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct RxRealization {
    pub params: ChannelParams,
    pub channel: ChannelRealization,
    pub rx: ResourceGrid,
}

/// Draws a scenario and sends the pilot grid (data REs silent) through the
/// realized channel. Pure function of `(config, pilots, ranges, sample_seed)`;
/// [`simulate_sample`] is this plus LS interpolation and f32 packing, so a
/// sample's received grid can be reproduced from its seed alone.
pub fn simulate_rx(
    config: &GridConfig,
    pilots: &PilotPattern,
    ranges: &ParamRanges,
    sample_seed: u64,
) -> Result<RxRealization, ChanError> {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let params = sample_params(&mut rng, ranges)?;
    let channel = synth_channel(&params, config)?;

    let zeros = vec![Complex64::new(0.0, 0.0); config.num_data_res()];
    let tx = ResourceGrid::compose(config, pilots, &zeros)?;
    let rx = apply_channel(&tx, &channel, &mut rng)?;
    Ok(RxRealization { params, channel, rx })
}

/// Simulates one sample end to end: draw scenario, synthesize channel, send
/// the pilot grid through it, LS-estimate at pilots, interpolate to the full
/// grid. The whole pipeline is a pure function of `(config, pilots, ranges,
/// sample_seed)`.
pub fn simulate_sample(
    config: &GridConfig,
    pilots: &PilotPattern,
    ranges: &ParamRanges,
    sample_seed: u64,
) -> Result<(Sample, SampleMeta), ChanError> {
    let RxRealization { params, channel, rx } = simulate_rx(config, pilots, ranges, sample_seed)?;

    let sparse = ls_at_pilots(&rx, pilots)?;
    let full = interpolate_2d(&sparse, config)?;

    let sample = Sample {
        input: grid_to_f32(&full.h),
        label_h: grid_to_f32(&channel.h),
        label_noise: channel.sigma2 as f32,
    };
    let meta = SampleMeta {
        profile: params.profile,
        delay_spread_ns: params.delay_spread_s * 1e9,
        doppler_hz: params.doppler_hz,
        snr_db: params.snr_db,
        seed: params.seed,
    };
    Ok((sample, meta))
}
