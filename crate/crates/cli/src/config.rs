//! One JSON document configures every subcommand; dotted-key overrides
//! adjust it from the command line.
//!
//! Overrides look like `train.lr=0.003` or `bler.scenario.profile=tdl-c`.
//! The value side is parsed as JSON when possible and falls back to a bare
//! string (so `model.aggregation=sum` works without quoting). After all
//! overrides are applied the document is re-deserialized into the typed
//! config, which rejects unknown keys and ill-typed values.
//!
//! Every run writes `resolved_config.json` into its output directory: a
//! snapshot `{"config": .., "invocation": ..}` of the fully resolved config
//! and the argv that produced it. The snapshot is itself accepted by
//! `--config`, so any run can be reproduced from its output directory alone.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use gnce_core::chansim::ParamRanges;
use gnce_core::estimators::PracticalConfig;
use gnce_core::gnn::ModelConfig;
use gnce_core::grid::GridConfig;

use crate::bler::BlerConfig;
use crate::eval::EstimatorKind;
use crate::trainer::TrainConfig;
use crate::{io_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub count: usize,
    /// Master seed; sample `i` derives its own stream from it.
    pub seed: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig { count: 2000, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub estimators: Vec<EstimatorKind>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            estimators: vec![
                EstimatorKind::Oracle,
                EstimatorKind::Ls,
                EstimatorKind::Practical,
                EstimatorKind::Graphnet,
            ],
        }
    }
}

/// Root config. The defaults describe the standard setup end to end: the
/// 612 x 14 grid, the tied 32-wide model on a 3-nearest-pilot graph, the
/// full scenario ranges, and the stress-scenario BLER sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkbenchConfig {
    pub grid: GridConfig,
    /// Seed of the shared QPSK pilot pattern.
    pub pilot_seed: u64,
    /// Pilots linked to each node when building the graph.
    pub k_nearest: usize,
    pub model: ModelConfig,
    pub ranges: ParamRanges,
    pub practical: PracticalConfig,
    pub train: TrainConfig,
    pub generate: GenerateConfig,
    pub eval: EvalConfig,
    pub bler: BlerConfig,
}

impl Default for WorkbenchConfig {
    fn default() -> Self {
        WorkbenchConfig {
            grid: GridConfig::default(),
            pilot_seed: 1,
            k_nearest: 3,
            model: ModelConfig::default(),
            ranges: ParamRanges::default(),
            practical: PracticalConfig::default(),
            train: TrainConfig::default(),
            generate: GenerateConfig::default(),
            eval: EvalConfig::default(),
            bler: BlerConfig::default(),
        }
    }
}

impl WorkbenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.k_nearest == 0 {
            return Err(Error::usage("k_nearest must be >= 1"));
        }
        self.model.validate()?;
        self.ranges.validate()?;
        self.practical.validate()?;
        self.train.validate()?;
        self.bler.validate()?;
        if self.eval.estimators.is_empty() {
            return Err(Error::usage("eval.estimators must not be empty"));
        }
        Ok(())
    }
}

fn usage_err(e: impl std::fmt::Display, what: &str) -> Error {
    Error::usage(format!("{what}: {e}"))
}

/// Reads a config file: either a bare [`WorkbenchConfig`] document or a
/// `resolved_config.json` snapshot (recognized by its `config` key).
pub fn load_config(path: &Path) -> Result<WorkbenchConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| usage_err(e, &format!("{}", path.display())))?;
    let doc = match &value {
        Value::Object(map) if map.contains_key("config") => map["config"].clone(),
        _ => value,
    };
    from_value(doc)
}

fn from_value(doc: Value) -> Result<WorkbenchConfig> {
    serde_json::from_value(doc).map_err(|e| usage_err(e, "config"))
}

/// Splits `key.path=value`; the value is JSON if it parses, a string
/// otherwise.
fn parse_override(spec: &str) -> Result<(Vec<&str>, Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::usage(format!("override '{spec}' must look like key.path=value")))?;
    if key.is_empty() {
        return Err(Error::usage(format!("override '{spec}' has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.split('.').collect(), value))
}

/// Sets `path` inside `doc`. Intermediate objects are created on demand;
/// array segments must be in-range indices.
fn set_path(doc: &mut Value, spec: &str, path: &[&str], value: Value) -> Result<()> {
    let mut cursor = doc;
    for (i, seg) in path.iter().enumerate() {
        let last = i + 1 == path.len();
        match cursor {
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| {
                    Error::usage(format!("override '{spec}': '{seg}' is not an array index"))
                })?;
                if idx >= items.len() {
                    return Err(Error::usage(format!(
                        "override '{spec}': index {idx} is out of range (array length {})",
                        items.len()
                    )));
                }
                if last {
                    items[idx] = value;
                    return Ok(());
                }
                cursor = &mut items[idx];
            }
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                cursor = map
                    .entry(seg.to_string())
                    .or_insert_with(|| Value::Object(serde_json::Map::new()));
            }
            other => {
                return Err(Error::usage(format!(
                    "override '{spec}': '{seg}' cannot index into {other}"
                )));
            }
        }
    }
    unreachable!("path is never empty");
}

/// Applies dotted-key overrides and re-validates the typed result.
pub fn apply_overrides(config: &WorkbenchConfig, overrides: &[String]) -> Result<WorkbenchConfig> {
    if overrides.is_empty() {
        return Ok(config.clone());
    }
    let mut doc = serde_json::to_value(config).expect("config serializes");
    for spec in overrides {
        let (path, value) = parse_override(spec)?;
        set_path(&mut doc, spec, &path, value)?;
    }
    from_value(doc)
}

/// The `{"config": .., "invocation": ..}` snapshot written to every output
/// directory.
pub fn resolved_snapshot(config: &WorkbenchConfig, invocation: &[String]) -> String {
    let doc = serde_json::json!({ "config": config, "invocation": invocation });
    let mut text = serde_json::to_string_pretty(&doc).expect("snapshot serializes");
    text.push('\n');
    text
}

pub fn write_resolved_config(
    dir: &Path,
    config: &WorkbenchConfig,
    invocation: &[String],
) -> Result<std::path::PathBuf> {
    let path = dir.join("resolved_config.json");
    std::fs::write(&path, resolved_snapshot(config, invocation)).map_err(|e| io_err(&path, e))?;
    Ok(path)
}
