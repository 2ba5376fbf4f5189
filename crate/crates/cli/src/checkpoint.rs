//! Checkpoint file format: a JSON manifest plus a raw f32 payload.
//!
//! `<stem>.json` describes the model (structural config, named tensor shapes
//! in canonical order, grid and graph the model was trained for, noise-label
//! encoding). `<stem>.bin` is the concatenation of every tensor as f32
//! little-endian in exactly the manifest's order — the default tied model's
//! 2307 parameters occupy 9228 bytes. Saving is quantizing: parameters are
//! stored as f32, so save -> load -> save is byte-identical.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gnce_core::gnn::{ModelConfig, ModelParams};
use gnce_core::graph::GraphTopology;
use gnce_core::grid::GridConfig;

use crate::labels::NoiseLabelMode;
use crate::{io_err, Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    pub fn elements(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub model: ModelConfig,
    /// Grid the graph was built over (node count, pilot layout).
    pub grid: GridConfig,
    pub pilot_seed: u64,
    pub k_nearest: usize,
    pub noise_label: NoiseLabelMode,
    /// Tensors in payload order.
    pub tensors: Vec<TensorSpec>,
    pub payload_bytes: u64,
}

/// A checkpoint read back into memory.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub manifest: CheckpointManifest,
    pub params: ModelParams,
}

impl LoadedModel {
    /// Rebuilds the pilot graph the checkpoint was trained against.
    pub fn topology(&self) -> Result<GraphTopology> {
        Ok(GraphTopology::from_config(&self.manifest.grid, self.manifest.k_nearest)?)
    }
}

fn tensor_specs_of(params: &ModelParams) -> Vec<TensorSpec> {
    params
        .tensor_specs()
        .into_iter()
        .map(|(name, shape)| TensorSpec { name: name.to_string(), shape })
        .collect()
}

/// Writes `<stem>.json` and `<stem>.bin` under `dir`; returns both paths.
/// The stored parameters are the f32 quantization of `params`.
pub fn save_checkpoint(
    dir: &Path,
    stem: &str,
    params: &ModelParams,
    grid: &GridConfig,
    pilot_seed: u64,
    k_nearest: usize,
    noise_label: NoiseLabelMode,
) -> Result<(PathBuf, PathBuf)> {
    let payload = params.to_f32();
    let manifest = CheckpointManifest {
        format_version: FORMAT_VERSION,
        model: params.config.clone(),
        grid: grid.clone(),
        pilot_seed,
        k_nearest,
        noise_label,
        tensors: tensor_specs_of(params),
        payload_bytes: 4 * payload.len() as u64,
    };

    let json_path = dir.join(format!("{stem}.json"));
    let bin_path = dir.join(format!("{stem}.bin"));
    let mut json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::data(format!("checkpoint manifest serialization: {e}")))?;
    json.push('\n');
    std::fs::write(&json_path, json).map_err(|e| io_err(&json_path, e))?;

    let mut bytes = Vec::with_capacity(4 * payload.len());
    for v in &payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&bin_path, bytes).map_err(|e| io_err(&bin_path, e))?;
    Ok((json_path, bin_path))
}

/// Loads a checkpoint given its `.json` (or `.bin`) path.
pub fn load_checkpoint(path: &Path) -> Result<LoadedModel> {
    let (json_path, bin_path) = match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => {
            let mut p = path.to_path_buf();
            p.set_extension("json");
            (p, path.to_path_buf())
        }
        _ => {
            let mut p = path.to_path_buf();
            p.set_extension("bin");
            (path.to_path_buf(), p)
        }
    };
    let text = std::fs::read_to_string(&json_path).map_err(|e| io_err(&json_path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("{}: {e}", json_path.display())))?;
    let fail = |msg: String| Error::Data(format!("{}: {msg}", bin_path.display()));

    if manifest.format_version != FORMAT_VERSION {
        return Err(fail(format!(
            "unsupported checkpoint format version {}",
            manifest.format_version
        )));
    }
    manifest.model.validate()?;
    manifest.grid.validate()?;

    let mut params = ModelParams::zeros_like(&manifest.model);
    let expect_tensors = tensor_specs_of(&params);
    if manifest.tensors != expect_tensors {
        return Err(fail(format!(
            "tensor table does not match the model config (expected {:?})",
            expect_tensors.iter().map(|t| t.name.as_str()).collect::<Vec<_>>()
        )));
    }
    let count = params.param_count();
    if manifest.payload_bytes != 4 * count as u64 {
        return Err(fail(format!(
            "payload_bytes {} != 4 * {count} parameters",
            manifest.payload_bytes
        )));
    }

    let bytes = std::fs::read(&bin_path).map_err(|e| io_err(&bin_path, e))?;
    if bytes.len() != 4 * count {
        return Err(fail(format!("expected {} payload bytes, found {}", 4 * count, bytes.len())));
    }
    let flat: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!(
            "{}: checkpoint contains non-finite parameters",
            bin_path.display()
        )));
    }
    params.load_f32(&flat)?;
    Ok(LoadedModel { manifest, params })
}
