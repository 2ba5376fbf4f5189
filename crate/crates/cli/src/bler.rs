//! Block-error-rate evaluation over a 16QAM downlink.
//!
//! One block = one slot: random 16QAM payload on every data RE, pilots on
//! DM-RS REs, one independent channel realization. Every requested estimator
//! sees the *same* received grid per block (paired comparison), equalizes the
//! data REs (MMSE when it supplies a noise power, zero-forcing otherwise),
//! and a block counts as errored when its symbol error rate exceeds the
//! configured threshold. Block `b` of SNR point `i` is seeded from
//! `derive_seed(seed, BLER_BLOCK, i * blocks + b)`, so results do not depend
//! on thread count or evaluation order.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use gnce_core::chansim::{apply_channel, synth_channel, ChannelParams, ChannelRealization};
use gnce_core::estimators::{ls_estimate, practical_estimate, PracticalConfig};
use gnce_core::gnn;
use gnce_core::graph::{features_from_grid, GraphTopology};
use gnce_core::grid::{GridConfig, PilotPattern, ResourceGrid};
use gnce_core::modem;
use gnce_core::rng::{derive_seed, salt};
use gnce_core::tdl::TdlProfileId;
use gnce_core::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::LoadedModel;
use crate::eval::EstimatorKind;
use crate::labels::NoiseLabelMode;
use crate::report::{EvalReport, ReportRow};
use crate::{Error, Result};

/// Everything an estimator may look at for one block. `truth` exists for the
/// oracle bound; honest estimators must only read `rx`, `pilots`, `config`.
pub struct BlockContext<'a> {
    pub config: &'a GridConfig,
    pub pilots: &'a PilotPattern,
    pub rx: &'a ResourceGrid,
    pub truth: &'a ChannelRealization,
}

/// A channel estimate plus the noise power to equalize with
/// (`None` selects zero-forcing).
pub struct Estimate {
    pub h: ResourceGrid,
    pub sigma2: Option<f64>,
}

/// Per-block channel estimation strategy.
pub trait BlockEstimator: Sync {
    fn name(&self) -> &str;
    fn estimate(&self, ctx: &BlockContext) -> Result<Estimate>;
}

struct OracleEstimator;

impl BlockEstimator for OracleEstimator {
    fn name(&self) -> &str {
        "oracle"
    }

    fn estimate(&self, ctx: &BlockContext) -> Result<Estimate> {
        Ok(Estimate { h: ctx.truth.h.clone(), sigma2: Some(ctx.truth.sigma2) })
    }
}

struct LsEstimator;

impl BlockEstimator for LsEstimator {
    fn name(&self) -> &str {
        "ls"
    }

    fn estimate(&self, ctx: &BlockContext) -> Result<Estimate> {
        let full = ls_estimate(ctx.rx, ctx.pilots, ctx.config)?;
        Ok(Estimate { h: full.h, sigma2: None })
    }
}

struct PracticalEstimator {
    practical: PracticalConfig,
}

impl BlockEstimator for PracticalEstimator {
    fn name(&self) -> &str {
        "practical"
    }

    fn estimate(&self, ctx: &BlockContext) -> Result<Estimate> {
        let full = practical_estimate(ctx.rx, ctx.pilots, ctx.config, &self.practical)?;
        Ok(Estimate { h: full.h, sigma2: full.sigma2_est })
    }
}

struct GraphEstimator {
    params: gnn::ModelParams,
    topo: Arc<GraphTopology>,
    noise_label: NoiseLabelMode,
    /// When false the noise head is ignored and equalization is zero-forcing.
    use_noise: bool,
}

impl GraphEstimator {
    fn new(model: &LoadedModel, use_noise: bool) -> Result<Self> {
        Ok(GraphEstimator {
            params: model.params.clone(),
            topo: Arc::new(model.topology()?),
            noise_label: model.manifest.noise_label,
            use_noise,
        })
    }
}

impl BlockEstimator for GraphEstimator {
    fn name(&self) -> &str {
        if self.use_noise {
            "graphnet"
        } else {
            "graphnet_zf"
        }
    }

    fn estimate(&self, ctx: &BlockContext) -> Result<Estimate> {
        let full = ls_estimate(ctx.rx, ctx.pilots, ctx.config)?;
        let x = features_from_grid(&full.h);
        let (out, _) = gnn::forward(&self.params, &self.topo, &x)?;
        let mut h = ResourceGrid::for_config(ctx.config);
        for (i, slot) in h.as_mut_slice().iter_mut().enumerate() {
            *slot = Complex64::new(out.h_hat[2 * i], out.h_hat[2 * i + 1]);
        }
        let sigma2 = self.use_noise.then(|| {
            crate::labels::decode_noise(
                self.noise_label,
                self.params.config.noise_label_scale,
                out.noise_hat,
            )
        });
        Ok(Estimate { h, sigma2 })
    }
}

/// Builds the estimator set for a run. A checkpoint is required iff a graph
/// estimator is requested, and must match `grid`.
pub fn build_estimators(
    kinds: &[EstimatorKind],
    grid: &GridConfig,
    practical: &PracticalConfig,
    model: Option<&LoadedModel>,
) -> Result<Vec<Box<dyn BlockEstimator>>> {
    let mut out: Vec<Box<dyn BlockEstimator>> = Vec::with_capacity(kinds.len());
    for kind in kinds {
        out.push(match kind {
            EstimatorKind::Oracle => Box::new(OracleEstimator),
            EstimatorKind::Ls => Box::new(LsEstimator),
            EstimatorKind::Practical => {
                practical.validate()?;
                Box::new(PracticalEstimator { practical: practical.clone() })
            }
            EstimatorKind::Graphnet | EstimatorKind::GraphnetZf => {
                let model = model.ok_or_else(|| {
                    Error::usage("graphnet estimators require a checkpoint")
                })?;
                if &model.manifest.grid != grid {
                    return Err(Error::data(
                        "checkpoint grid configuration differs from the evaluation grid",
                    ));
                }
                Box::new(GraphEstimator::new(model, *kind == EstimatorKind::Graphnet)?)
            }
        });
    }
    Ok(out)
}

/// Fading scenario for a BLER sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub profile: TdlProfileId,
    pub delay_spread_ns: f64,
    pub doppler_hz: f64,
}

impl Default for Scenario {
    /// The high-dynamics stress scenario.
    fn default() -> Self {
        Scenario { profile: TdlProfileId::TdlA, delay_spread_ns: 300.0, doppler_hz: 200.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlerConfig {
    pub snr_points_db: Vec<f64>,
    pub blocks_per_snr: usize,
    pub scenario: Scenario,
    /// A block is errored when its symbol error rate exceeds this.
    pub ser_threshold: f64,
    pub estimators: Vec<EstimatorKind>,
    pub seed: u64,
}

impl Default for BlerConfig {
    fn default() -> Self {
        BlerConfig {
            snr_points_db: (0..13).map(|i| -5.0 + 2.0 * i as f64).collect(),
            blocks_per_snr: 200,
            scenario: Scenario::default(),
            ser_threshold: 0.05,
            estimators: vec![
                EstimatorKind::Oracle,
                EstimatorKind::Ls,
                EstimatorKind::Practical,
                EstimatorKind::Graphnet,
            ],
            seed: 2025,
        }
    }
}

impl BlerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snr_points_db.is_empty() {
            return Err(Error::usage("bler.snr_points_db must not be empty"));
        }
        if self.snr_points_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("bler.snr_points_db must be finite"));
        }
        if self.blocks_per_snr == 0 {
            return Err(Error::usage("bler.blocks_per_snr must be >= 1"));
        }
        if !(self.ser_threshold >= 0.0 && self.ser_threshold < 1.0) {
            return Err(Error::usage("bler.ser_threshold must lie in [0, 1)"));
        }
        if !(self.scenario.delay_spread_ns.is_finite() && self.scenario.delay_spread_ns >= 0.0) {
            return Err(Error::usage("bler.scenario.delay_spread_ns must be >= 0"));
        }
        if !(self.scenario.doppler_hz.is_finite() && self.scenario.doppler_hz >= 0.0) {
            return Err(Error::usage("bler.scenario.doppler_hz must be >= 0"));
        }
        if self.estimators.is_empty() {
            return Err(Error::usage("bler.estimators must not be empty"));
        }
        for (i, a) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(a) {
                return Err(Error::usage(format!("duplicate estimator {}", a.name())));
            }
        }
        Ok(())
    }
}

/// One BLER curve point with its per-block outcomes (kept for paired tests).
#[derive(Debug, Clone, PartialEq)]
pub struct BlerPoint {
    pub estimator: String,
    pub snr_db: f64,
    /// Outcome of block `b` (index within this SNR point, all estimators
    /// aligned on the same received grids).
    pub block_error: Vec<bool>,
    pub mean_ser: f64,
}

impl BlerPoint {
    pub fn bler(&self) -> f64 {
        let errs = self.block_error.iter().filter(|&&e| e).count();
        errs as f64 / self.block_error.len() as f64
    }
}

/// Runs the sweep. Output points are ordered (estimator, SNR point), blocks
/// within a point by block index.
pub fn run_bler(
    grid: &GridConfig,
    pilots: &PilotPattern,
    cfg: &BlerConfig,
    estimators: &[Box<dyn BlockEstimator>],
) -> Result<Vec<BlerPoint>> {
    grid.validate()?;
    cfg.validate()?;
    if estimators.is_empty() {
        return Err(Error::usage("no estimators supplied"));
    }
    let data_pos = grid.data_positions();
    let blocks = cfg.blocks_per_snr;
    // per_snr[si] = per-block (error flags, ser) per estimator.
    let mut points: Vec<BlerPoint> = estimators
        .iter()
        .flat_map(|est| {
            cfg.snr_points_db.iter().map(|&snr| BlerPoint {
                estimator: est.name().to_string(),
                snr_db: snr,
                block_error: Vec::with_capacity(blocks),
                mean_ser: 0.0,
            })
        })
        .collect();

    for (si, &snr_db) in cfg.snr_points_db.iter().enumerate() {
        let block_outcomes: Vec<(Vec<bool>, Vec<f64>)> = (0..blocks)
            .into_par_iter()
            .map(|b| -> Result<(Vec<bool>, Vec<f64>)> {
                let global = (si * blocks + b) as u64;
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, salt::BLER_BLOCK, global));
                let fading_seed = rng.next_u64();
                let payload = modem::random_symbols(&mut rng, data_pos.len());
                let params = ChannelParams {
                    profile: cfg.scenario.profile,
                    delay_spread_s: cfg.scenario.delay_spread_ns * 1e-9,
                    doppler_hz: cfg.scenario.doppler_hz,
                    snr_db,
                    seed: fading_seed,
                };
                let channel = synth_channel(&params, grid)?;
                let data: Vec<Complex64> =
                    payload.iter().map(|&s| modem::qam16_map(s)).collect();
                let tx = ResourceGrid::compose(grid, pilots, &data)?;
                let rx = apply_channel(&tx, &channel, &mut rng)?;
                let ctx = BlockContext { config: grid, pilots, rx: &rx, truth: &channel };

                let mut errs = Vec::with_capacity(estimators.len());
                let mut sers = Vec::with_capacity(estimators.len());
                for est in estimators {
                    let e = est.estimate(&ctx)?;
                    let mut wrong = 0usize;
                    for (di, &(m, n)) in data_pos.iter().enumerate() {
                        let eq = match e.sigma2 {
                            Some(s2) => modem::mmse_equalize(rx.get(m, n), e.h.get(m, n), s2),
                            None => modem::zf_equalize(rx.get(m, n), e.h.get(m, n)),
                        };
                        if modem::qam16_demap(eq) != payload[di] {
                            wrong += 1;
                        }
                    }
                    let ser = wrong as f64 / data_pos.len() as f64;
                    sers.push(ser);
                    errs.push(ser > cfg.ser_threshold);
                }
                Ok((errs, sers))
            })
            .collect::<Result<_>>()?;

        for (ei, _) in estimators.iter().enumerate() {
            let point = &mut points[ei * cfg.snr_points_db.len() + si];
            let mut ser_sum = 0.0;
            for (errs, sers) in &block_outcomes {
                point.block_error.push(errs[ei]);
                ser_sum += sers[ei];
            }
            point.mean_ser = ser_sum / blocks as f64;
        }
    }
    Ok(points)
}

/// Flattens sweep points into `bler` and `mean_ser` report rows.
pub fn bler_report(points: &[BlerPoint]) -> EvalReport {
    let mut rows = Vec::with_capacity(2 * points.len());
    for p in points {
        let count = p.block_error.len() as u64;
        rows.push(ReportRow {
            estimator: p.estimator.clone(),
            snr_db: p.snr_db,
            metric: "bler".to_string(),
            value: p.bler(),
            count,
        });
        rows.push(ReportRow {
            estimator: p.estimator.clone(),
            snr_db: p.snr_db,
            metric: "mean_ser".to_string(),
            value: p.mean_ser,
            count,
        });
    }
    let mut report = EvalReport::new(rows);
    report.sort();
    report
}

/// Ranks with ties averaged (1-based).
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with tie-averaged ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    crate::eval::pearson(&ranks(xs), &ranks(ys))
}
