//! Estimator evaluation on stored datasets: MSE vs SNR and noise-estimate
//! quality.
//!
//! Every estimator is scored with the same metric — mean squared complex
//! error against the stored true channel — on the same samples. A sample's
//! raw LS values at pilot positions are recovered from its stored input (the
//! interpolant passes through its knots), so no channel re-simulation is
//! needed. Samples are bucketed by their exact manifest `snr_db` value.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use gnce_core::estimators::{practical_from_sparse, PracticalConfig, SparseEstimate};
use gnce_core::gnn;
use gnce_core::graph::{features_from_f32, GraphTopology};
use gnce_core::Complex64;

use crate::checkpoint::LoadedModel;
use crate::dataset::Dataset;
use crate::report::{EvalReport, ReportRow};
use crate::{Error, Result};

/// The estimators the workbench can score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// True channel and true noise power (performance ceiling).
    Oracle,
    /// LS at pilots + 2-D linear interpolation, zero-forcing equalization.
    Ls,
    /// LS + delay-domain denoising baseline, MMSE with its own noise estimate.
    Practical,
    /// Graph network, MMSE with its own noise estimate.
    Graphnet,
    /// Graph network estimate with the noise head ignored (zero-forcing);
    /// BLER-only ablation of the noise output.
    GraphnetZf,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Oracle => "oracle",
            EstimatorKind::Ls => "ls",
            EstimatorKind::Practical => "practical",
            EstimatorKind::Graphnet => "graphnet",
            EstimatorKind::GraphnetZf => "graphnet_zf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "oracle" => Some(EstimatorKind::Oracle),
            "ls" => Some(EstimatorKind::Ls),
            "practical" => Some(EstimatorKind::Practical),
            "graphnet" => Some(EstimatorKind::Graphnet),
            "graphnet_zf" => Some(EstimatorKind::GraphnetZf),
            _ => None,
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, EstimatorKind::Graphnet | EstimatorKind::GraphnetZf)
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// MSE report plus noise-estimate quality for estimators that emit one.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    /// `mse` rows for every estimator and `noise_median_rel_err` rows for
    /// noise-emitting ones, bucketed by SNR.
    pub report: EvalReport,
    /// Pearson correlation between estimated and true noise power over the
    /// whole set, per noise-emitting estimator.
    pub noise_corr: Vec<(String, f64)>,
    /// SNR values that appear in the dataset's configured grid but had no
    /// samples (reported, not an error).
    pub empty_buckets: Vec<f64>,
}

struct SampleScore {
    /// Per estimator, aligned with the `kinds` argument.
    mse: Vec<f64>,
    sigma2_est: Vec<Option<f64>>,
}

fn mse_f32(est: &[f32], truth: &[f32]) -> f64 {
    debug_assert_eq!(est.len(), truth.len());
    let sum: f64 = est
        .iter()
        .zip(truth)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    // Two components per RE: normalize by the number of complex entries.
    sum / (est.len() / 2) as f64
}

fn mse_vs_f32(est: &[Complex64], truth: &[f32]) -> f64 {
    debug_assert_eq!(2 * est.len(), truth.len());
    let sum: f64 = est
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let dr = z.re - truth[2 * i] as f64;
            let di = z.im - truth[2 * i + 1] as f64;
            dr * dr + di * di
        })
        .sum();
    sum / est.len() as f64
}

/// Raw LS values at pilot positions, recovered from the stored interpolated
/// input (piecewise-linear interpolation is exact at its knots).
fn sparse_from_input(
    input: &[f32],
    positions: &[(usize, usize)],
    num_symbols: usize,
) -> SparseEstimate {
    let values = positions
        .iter()
        .map(|&(m, n)| {
            let i = m * num_symbols + n;
            Complex64::new(input[2 * i] as f64, input[2 * i + 1] as f64)
        })
        .collect();
    SparseEstimate { positions: positions.to_vec(), values }
}

fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Pearson correlation coefficient; NaN if either side is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

fn check_model_compat(ds: &Dataset, model: &LoadedModel) -> Result<()> {
    if model.manifest.grid != ds.manifest.grid {
        return Err(Error::data(
            "checkpoint grid configuration differs from the dataset grid",
        ));
    }
    Ok(())
}

/// Scores `kinds` on every sample of `ds`. `model` is required iff a graph
/// estimator is requested.
pub fn evaluate(
    ds: &Dataset,
    kinds: &[EstimatorKind],
    model: Option<&LoadedModel>,
    practical_cfg: &PracticalConfig,
) -> Result<EvalOutcome> {
    if kinds.is_empty() {
        return Err(Error::usage("no estimators requested"));
    }
    if ds.is_empty() {
        return Err(Error::data("dataset has no samples"));
    }
    if kinds.contains(&EstimatorKind::GraphnetZf) {
        return Err(Error::usage(
            "graphnet_zf differs from graphnet only under equalization; \
             it is valid for BLER evaluation, not MSE",
        ));
    }
    practical_cfg.validate()?;
    let grid = &ds.manifest.grid;
    let needs_model = kinds.iter().any(|k| k.needs_model());
    let model_parts: Option<(&LoadedModel, GraphTopology)> = match (needs_model, model) {
        (true, Some(m)) => {
            check_model_compat(ds, m)?;
            Some((m, m.topology()?))
        }
        (true, None) => return Err(Error::usage("graphnet evaluation requires a checkpoint")),
        (false, _) => None,
    };
    let positions = grid.pilot_positions();
    let num_symbols = grid.num_symbols;

    let scores: Vec<SampleScore> = ds
        .samples
        .par_iter()
        .map(|sample| -> Result<SampleScore> {
            // Graph outputs are shared by all graph kinds of this sample.
            let graph_out = match &model_parts {
                Some((m, topo)) => {
                    let x = features_from_f32(&sample.input);
                    let (out, _) = gnn::forward(&m.params, topo, &x)?;
                    let sigma2 = crate::labels::decode_noise(
                        m.manifest.noise_label,
                        m.params.config.noise_label_scale,
                        out.noise_hat,
                    );
                    Some((out.h_hat, sigma2))
                }
                None => None,
            };
            let mut mse = Vec::with_capacity(kinds.len());
            let mut sigma2_est = Vec::with_capacity(kinds.len());
            for kind in kinds {
                match kind {
                    EstimatorKind::Oracle => {
                        mse.push(mse_f32(&sample.label_h, &sample.label_h));
                        sigma2_est.push(Some(sample.label_noise as f64));
                    }
                    EstimatorKind::Ls => {
                        mse.push(mse_f32(&sample.input, &sample.label_h));
                        sigma2_est.push(None);
                    }
                    EstimatorKind::Practical => {
                        let sparse = sparse_from_input(&sample.input, &positions, num_symbols);
                        let full = practical_from_sparse(&sparse, grid, practical_cfg)?;
                        mse.push(mse_vs_f32(full.h.as_slice(), &sample.label_h));
                        sigma2_est.push(full.sigma2_est);
                    }
                    EstimatorKind::Graphnet => {
                        let (h_hat, sigma2) = graph_out.as_ref().expect("model required");
                        let err: f64 = h_hat
                            .iter()
                            .zip(&sample.label_h)
                            .map(|(&a, &b)| {
                                let d = a - b as f64;
                                d * d
                            })
                            .sum();
                        mse.push(err / (h_hat.len() / 2) as f64);
                        sigma2_est.push(Some(*sigma2));
                    }
                    EstimatorKind::GraphnetZf => unreachable!("rejected above"),
                }
            }
            Ok(SampleScore { mse, sigma2_est })
        })
        .collect::<Result<_>>()?;

    // Bucket sample indices by exact SNR value, ascending.
    let mut buckets: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, meta) in ds.manifest.samples.iter().enumerate() {
        buckets.entry(meta.snr_db.to_bits()).or_default().push(i);
    }
    let mut bucket_list: Vec<(f64, &Vec<usize>)> =
        buckets.iter().map(|(bits, idx)| (f64::from_bits(*bits), idx)).collect();
    bucket_list.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rows = Vec::new();
    for (ki, kind) in kinds.iter().enumerate() {
        for (snr_db, idxs) in &bucket_list {
            let mean_mse =
                idxs.iter().map(|&i| scores[i].mse[ki]).sum::<f64>() / idxs.len() as f64;
            rows.push(ReportRow {
                estimator: kind.name().to_string(),
                snr_db: *snr_db,
                metric: "mse".to_string(),
                value: mean_mse,
                count: idxs.len() as u64,
            });
            if matches!(kind, EstimatorKind::Practical | EstimatorKind::Graphnet) {
                let mut rel: Vec<f64> = idxs
                    .iter()
                    .filter_map(|&i| {
                        let truth = ds.samples[i].label_noise as f64;
                        let est = scores[i].sigma2_est[ki]?;
                        (truth > 0.0).then(|| (est - truth).abs() / truth)
                    })
                    .collect();
                if !rel.is_empty() {
                    rows.push(ReportRow {
                        estimator: kind.name().to_string(),
                        snr_db: *snr_db,
                        metric: "noise_median_rel_err".to_string(),
                        value: median(&mut rel),
                        count: rel.len() as u64,
                    });
                }
            }
        }
    }

    let mut noise_corr = Vec::new();
    for (ki, kind) in kinds.iter().enumerate() {
        if !matches!(kind, EstimatorKind::Practical | EstimatorKind::Graphnet) {
            continue;
        }
        let mut est = Vec::new();
        let mut truth = Vec::new();
        for (i, score) in scores.iter().enumerate() {
            if let Some(s) = score.sigma2_est[ki] {
                est.push(s);
                truth.push(ds.samples[i].label_noise as f64);
            }
        }
        if est.len() >= 2 {
            noise_corr.push((kind.name().to_string(), pearson(&est, &truth)));
        }
    }

    let observed: Vec<f64> = bucket_list.iter().map(|(snr, _)| *snr).collect();
    let empty_buckets: Vec<f64> = ds
        .manifest
        .ranges
        .snr
        .grid_values()
        .into_iter()
        .filter(|v| !observed.contains(v))
        .collect();

    let mut report = EvalReport::new(rows);
    report.sort();
    Ok(EvalOutcome { report, noise_corr, empty_buckets })
}
