//! Training loop: per-sample Adam updates of the graph estimator.
//!
//! The dataset is split by index — the first `1 - val_fraction` of samples
//! train, the tail validates (with `val_fraction = 0.1`, a 90/10 split). Each
//! epoch visits the training split once in an order shuffled from
//! `derive_seed(seed, TRAIN_SHUFFLE, epoch)`; parameters are initialized from
//! `derive_seed(seed, MODEL_INIT, 0)`. Per-sample losses are accumulated by
//! dataset index and summed in index order, so reported epoch means are
//! independent of visit order (with `lr = 0` every epoch reports bit-equal
//! metrics). Record `epoch = 0` is an update-free evaluation of the initial
//! model — the baseline later epochs are compared against.
//!
//! After every epoch the parameters are quantized through f32 (exactly what a
//! checkpoint stores) and that copy is scored on the validation split as
//! `checkpoint_loss`, so reloading the checkpoint and recomputing reproduces
//! the logged value bit-for-bit. A non-finite loss aborts training with the
//! offending epoch and sample index.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use gnce_core::gnn::adam::{AdamConfig, AdamState};
use gnce_core::gnn::{self, GnnError, LossWeights, ModelConfig, ModelParams};
use gnce_core::graph::{features_from_f32, GraphTopology};
use gnce_core::rng::{derive_seed, salt, uniform_index};

use crate::dataset::Dataset;
use crate::labels::{encode_noise, NoiseLabelMode};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Weight of the channel-estimate term in the loss.
    pub lambda_ce: f64,
    /// Weight of the noise-estimate term in the loss.
    pub lambda_no: f64,
    /// Drives model init and the per-epoch shuffles.
    pub seed: u64,
    /// Evaluate the validation split with the live parameters every k-th
    /// epoch (0 = never).
    pub eval_every: usize,
    /// Tail fraction of the dataset held out for validation.
    pub val_fraction: f64,
    pub noise_label: NoiseLabelMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            lr: 1e-3,
            lambda_ce: 1.0,
            lambda_no: 1.0,
            seed: 2024,
            eval_every: 0,
            val_fraction: 0.1,
            noise_label: NoiseLabelMode::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::usage("train.lr must be finite and >= 0"));
        }
        for (name, v) in [("lambda_ce", self.lambda_ce), ("lambda_no", self.lambda_no)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::usage(format!("train.{name} must be finite and >= 0")));
            }
        }
        if !(self.val_fraction >= 0.0 && self.val_fraction < 1.0) {
            return Err(Error::usage("train.val_fraction must lie in [0, 1)"));
        }
        Ok(())
    }

    fn weights(&self) -> LossWeights {
        LossWeights { lambda_ce: self.lambda_ce, lambda_no: self.lambda_no }
    }
}

/// One line of the training log (serialized as JSONL). Contains no
/// wall-clock information: logs are byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 0 is the update-free evaluation of the freshly initialized model.
    pub epoch: usize,
    /// Training-split samples contributing to the means.
    pub samples: usize,
    /// Mean total loss over the training split.
    pub mean_loss: f64,
    /// Mean channel term (per-node squared error) over the training split.
    pub mean_channel_mse: f64,
    /// Mean squared noise-label error (in encoded label space).
    pub mean_noise_err: f64,
    pub lr: f64,
    /// Mean total loss of the f32-quantized parameters (what the epoch's
    /// checkpoint stores) over the validation split.
    pub checkpoint_loss: f64,
    /// Mean total loss of the live parameters over the validation split,
    /// present every `eval_every`-th epoch.
    pub val_loss: Option<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub records: Vec<EpochRecord>,
    /// Final live (f64) parameters.
    pub params: ModelParams,
    /// Final f32-quantized copy — bit-equal to the last saved checkpoint.
    pub quantized: ModelParams,
}

struct SplitSpec {
    n_train: usize,
    val: std::ops::Range<usize>,
}

fn split(ds: &Dataset, val_fraction: f64) -> Result<SplitSpec> {
    let n = ds.len();
    let n_val = (n as f64 * val_fraction).floor() as usize;
    let n_train = n - n_val;
    if n_train == 0 {
        return Err(Error::usage("training split is empty"));
    }
    // With no held-out samples, validation metrics fall back to the
    // training split so checkpoint_loss stays meaningful.
    let val = if n_val == 0 { 0..n } else { n_train..n };
    Ok(SplitSpec { n_train, val })
}

/// Loss of `params` on sample `idx` without updating anything.
fn sample_loss(
    params: &ModelParams,
    topo: &GraphTopology,
    ds: &Dataset,
    idx: usize,
    tc: &TrainConfig,
) -> Result<gnn::LossParts> {
    let s = &ds.samples[idx];
    let x = features_from_f32(&s.input);
    let label_h = features_from_f32(&s.label_h);
    let label_noise = encode_noise(
        tc.noise_label,
        params.config.noise_label_scale,
        s.label_noise as f64,
    );
    let (out, _) = gnn::forward(params, topo, &x).map_err(|e| at_sample(e, idx))?;
    Ok(gnn::loss_parts(&out, &label_h, label_noise, &tc.weights()))
}

fn mean_loss_over(
    params: &ModelParams,
    topo: &GraphTopology,
    ds: &Dataset,
    indices: std::ops::Range<usize>,
    tc: &TrainConfig,
) -> Result<f64> {
    let n = indices.len();
    let mut total = 0.0;
    for idx in indices {
        total += sample_loss(params, topo, ds, idx, tc)?.total;
    }
    Ok(total / n as f64)
}

fn at_sample(e: GnnError, idx: usize) -> Error {
    match e {
        GnnError::NonFinite { .. } => Error::numeric(format!("sample {idx}: {e}")),
        other => Error::from(other),
    }
}

/// Trains `model_cfg` on `ds` over `topo`. `on_epoch` runs after every epoch
/// (including epoch 0) with the record and the f32-quantized parameters —
/// the hook for persisting checkpoints and log lines.
pub fn train(
    ds: &Dataset,
    topo: &GraphTopology,
    model_cfg: &ModelConfig,
    tc: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &ModelParams) -> Result<()>,
) -> Result<TrainOutcome> {
    tc.validate()?;
    model_cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::data("dataset has no samples"));
    }
    let grid = &ds.manifest.grid;
    if topo.num_subcarriers() != grid.num_subcarriers() || topo.num_symbols() != grid.num_symbols
    {
        return Err(Error::data("graph topology does not match the dataset grid"));
    }
    let spec = split(ds, tc.val_fraction)?;
    let weights = tc.weights();

    let mut params = ModelParams::init(model_cfg, derive_seed(tc.seed, salt::MODEL_INIT, 0))?;
    // lr = 0 is allowed here (an exact no-op step) even though the optimizer
    // itself rejects it for standalone use.
    let adam_cfg = AdamConfig { lr: tc.lr, ..AdamConfig::default() };
    if tc.lr > 0.0 {
        adam_cfg.validate().map_err(Error::usage)?;
    }
    let mut adam = AdamState::new(params.param_count());

    let mut order: Vec<usize> = (0..spec.n_train).collect();
    let mut loss_by_index = vec![gnn::LossParts::default(); spec.n_train];
    let mut flat = params.to_flat();
    let mut records = Vec::with_capacity(tc.epochs + 1);

    for epoch in 0..=tc.epochs {
        if epoch == 0 {
            // Update-free baseline pass.
            for idx in 0..spec.n_train {
                loss_by_index[idx] = sample_loss(&params, topo, ds, idx, tc)?;
            }
        } else {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(tc.seed, salt::TRAIN_SHUFFLE, epoch as u64));
            for i in (1..order.len()).rev() {
                let j = uniform_index(&mut rng, i + 1);
                order.swap(i, j);
            }
            for &idx in &order {
                let s = &ds.samples[idx];
                let x = features_from_f32(&s.input);
                let label_h = features_from_f32(&s.label_h);
                let label_noise = encode_noise(
                    tc.noise_label,
                    params.config.noise_label_scale,
                    s.label_noise as f64,
                );
                let (parts, _, grads) =
                    gnn::loss_and_grads(&params, topo, &x, &label_h, label_noise, &weights)
                        .map_err(|e| at_sample(e, idx))?;
                loss_by_index[idx] = parts;
                // `flat` mirrors `params` (updates flow flat -> load_flat),
                // so Adam can step on it directly.
                adam.step(&adam_cfg, &mut flat, &grads.to_flat());
                params.load_flat(&flat)?;
            }
        }

        // Sum in dataset-index order: visit order cannot perturb the means.
        let (mut t, mut c, mut n) = (0.0, 0.0, 0.0);
        for parts in &loss_by_index {
            t += parts.total;
            c += parts.channel_mse;
            n += parts.noise_sq_err;
        }
        let denom = spec.n_train as f64;

        let mut quantized = params.clone();
        quantized.quantize_f32();
        let checkpoint_loss = mean_loss_over(&quantized, topo, ds, spec.val.clone(), tc)?;
        let val_loss = if tc.eval_every > 0 && epoch % tc.eval_every == 0 {
            Some(mean_loss_over(&params, topo, ds, spec.val.clone(), tc)?)
        } else {
            None
        };

        let record = EpochRecord {
            epoch,
            samples: spec.n_train,
            mean_loss: t / denom,
            mean_channel_mse: c / denom,
            mean_noise_err: n / denom,
            lr: tc.lr,
            checkpoint_loss,
            val_loss,
        };
        on_epoch(&record, &quantized)?;
        records.push(record);

        if epoch == tc.epochs {
            return Ok(TrainOutcome { records, params, quantized });
        }
    }
    unreachable!("loop returns on the final epoch");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_dataset;
    use gnce_core::chansim::ParamRanges;
    use gnce_core::grid::GridConfig;

    fn small_setup(n: usize) -> (Dataset, GraphTopology, ModelConfig) {
        let grid = GridConfig::new(2, 12, 14, vec![2, 11], vec![0, 6], 30e3).unwrap();
        let ds = generate_dataset(&grid, 1, &ParamRanges::default(), n, 123).unwrap();
        let topo = GraphTopology::from_config(&grid, 3).unwrap();
        let cfg = ModelConfig { hidden_dim: 8, ..ModelConfig::default() };
        (ds, topo, cfg)
    }

    fn no_hook(_: &EpochRecord, _: &ModelParams) -> Result<()> {
        Ok(())
    }

    #[test]
    fn loss_falls_on_a_small_problem() {
        let (ds, topo, cfg) = small_setup(30);
        let tc = TrainConfig { epochs: 4, ..TrainConfig::default() };
        let out = train(&ds, &topo, &cfg, &tc, no_hook).unwrap();
        assert_eq!(out.records.len(), 5);
        assert_eq!(out.records[0].epoch, 0);
        assert_eq!(out.records[0].samples, 27);
        let first = out.records[0].mean_loss;
        let last = out.records[4].mean_loss;
        assert!(last < 0.8 * first, "no progress: {first} -> {last}");
    }

    #[test]
    fn epoch_zero_performs_no_updates() {
        let (ds, topo, cfg) = small_setup(10);
        let tc = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let out = train(&ds, &topo, &cfg, &tc, no_hook).unwrap();
        assert_eq!(out.records.len(), 1);
        let init =
            ModelParams::init(&cfg, derive_seed(tc.seed, salt::MODEL_INIT, 0)).unwrap();
        assert_eq!(out.params.to_flat(), init.to_flat());
    }

    #[test]
    fn zero_learning_rate_reports_identical_epochs() {
        // Shuffle order changes per epoch; with lr = 0 the parameters never
        // move, so index-ordered accumulation must reproduce the exact same
        // bits every epoch.
        let (ds, topo, cfg) = small_setup(12);
        let tc = TrainConfig { epochs: 3, lr: 0.0, ..TrainConfig::default() };
        let out = train(&ds, &topo, &cfg, &tc, no_hook).unwrap();
        for r in &out.records[1..] {
            assert_eq!(r.mean_loss.to_bits(), out.records[0].mean_loss.to_bits());
            assert_eq!(r.mean_channel_mse.to_bits(), out.records[0].mean_channel_mse.to_bits());
            assert_eq!(r.mean_noise_err.to_bits(), out.records[0].mean_noise_err.to_bits());
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (ds, topo, cfg) = small_setup(14);
        let tc = TrainConfig { epochs: 2, ..TrainConfig::default() };
        let a = train(&ds, &topo, &cfg, &tc, no_hook).unwrap();
        let b = train(&ds, &topo, &cfg, &tc, no_hook).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.params.to_flat(), b.params.to_flat());

        let other = TrainConfig { seed: 9, ..tc };
        let c = train(&ds, &topo, &cfg, &other, no_hook).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn checkpoint_loss_replays_from_saved_parameters() {
        let (ds, topo, cfg) = small_setup(20);
        let tc = TrainConfig { epochs: 2, ..TrainConfig::default() };
        let dir = tempfile::tempdir().unwrap();
        let mut saved = Vec::new();
        let out = train(&ds, &topo, &cfg, &tc, |record, quantized| {
            let (json, _) = crate::checkpoint::save_checkpoint(
                dir.path(),
                &format!("epoch{}", record.epoch),
                quantized,
                &ds.manifest.grid,
                ds.manifest.pilot_seed,
                3,
                tc.noise_label,
            )?;
            saved.push((record.clone(), json));
            Ok(())
        })
        .unwrap();
        assert_eq!(saved.len(), out.records.len());
        for (record, json) in &saved {
            let loaded = crate::checkpoint::load_checkpoint(json).unwrap();
            let val = 18..20; // val_fraction 0.1 of 20 -> last 2 samples
            let replayed = mean_loss_over(&loaded.params, &topo, &ds, val, &tc).unwrap();
            assert!(
                (replayed - record.checkpoint_loss).abs() <= 1e-9,
                "epoch {}: {} vs {}",
                record.epoch,
                replayed,
                record.checkpoint_loss
            );
        }
    }

    #[test]
    fn non_finite_sample_aborts_with_its_index() {
        let (mut ds, topo, cfg) = small_setup(6);
        ds.samples[3].input[7] = f32::NAN;
        let tc = TrainConfig { epochs: 1, ..TrainConfig::default() };
        let err = train(&ds, &topo, &cfg, &tc, no_hook).unwrap_err();
        match err {
            Error::Numeric(msg) => assert!(msg.contains("sample 3"), "{msg}"),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn eval_every_gates_validation_metrics() {
        let (ds, topo, cfg) = small_setup(12);
        let tc = TrainConfig { epochs: 4, eval_every: 2, ..TrainConfig::default() };
        let out = train(&ds, &topo, &cfg, &tc, no_hook).unwrap();
        let has_val: Vec<bool> = out.records.iter().map(|r| r.val_loss.is_some()).collect();
        assert_eq!(has_val, [true, false, true, false, true]);
        // Quantization is mild: live and quantized validation losses agree
        // loosely on evaluated epochs.
        let last = &out.records[4];
        let rel = (last.val_loss.unwrap() - last.checkpoint_loss).abs()
            / last.checkpoint_loss.max(1e-12);
        assert!(rel < 1e-3, "val {} vs checkpoint {}", last.val_loss.unwrap(), last.checkpoint_loss);
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let bad_lr = TrainConfig { lr: -1.0, ..TrainConfig::default() };
        assert!(bad_lr.validate().is_err());
        let bad_frac = TrainConfig { val_fraction: 1.0, ..TrainConfig::default() };
        assert!(bad_frac.validate().is_err());
        let bad_lambda = TrainConfig { lambda_no: f64::NAN, ..TrainConfig::default() };
        assert!(bad_lambda.validate().is_err());
    }

    #[test]
    fn record_serializes_to_stable_jsonl() {
        let r = EpochRecord {
            epoch: 1,
            samples: 27,
            mean_loss: 0.5,
            mean_channel_mse: 0.375,
            mean_noise_err: 0.125,
            lr: 0.001,
            checkpoint_loss: 0.5625,
            val_loss: None,
        };
        let line = serde_json::to_string(&r).unwrap();
        assert_eq!(
            line,
            "{\"epoch\":1,\"samples\":27,\"mean_loss\":0.5,\"mean_channel_mse\":0.375,\
             \"mean_noise_err\":0.125,\"lr\":0.001,\"checkpoint_loss\":0.5625,\"val_loss\":null}"
        );
        let back: EpochRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
    }
}
