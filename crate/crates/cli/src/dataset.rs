//! Dataset file format: a binary tensor file plus a JSON manifest.
//!
//! `<stem>.bin` layout (all integers and floats little-endian):
//!
//! ```text
//! magic   4 bytes  "GNCE"
//! version u32      format version (currently 1)
//! count   u32      number of samples
//! m       u32      subcarriers per grid
//! n       u32      symbols per grid
//! then per sample:
//!   input       f32[m*n*2]   interpolated LS estimate, node order, re/im
//!   label_h     f32[m*n*2]   true channel response
//!   label_noise f32          true noise power sigma^2
//! ```
//!
//! `<stem>.json` records the generating configuration (grid, pilot seed,
//! scenario ranges, master seed) and per-sample provenance, enough to
//! reproduce any sample bit-exactly from its index alone.

use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use gnce_core::chansim::{simulate_sample, ParamRanges, Sample, SampleMeta};
use gnce_core::grid::{GridConfig, PilotPattern};
use gnce_core::rng::{derive_seed, salt};

use crate::{io_err, Error, Result};

pub const MAGIC: [u8; 4] = *b"GNCE";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to regenerate the dataset, plus per-sample provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub grid: GridConfig,
    /// Seed of the QPSK pilot pattern shared by every sample.
    pub pilot_seed: u64,
    pub ranges: ParamRanges,
    /// Master seed; sample `i` uses `derive_seed(master_seed, DATASET_SAMPLE, i)`.
    pub master_seed: u64,
    pub samples: Vec<SampleMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The pilot pattern every sample was generated with.
    pub fn pilots(&self) -> Result<PilotPattern> {
        Ok(PilotPattern::generate(&self.manifest.grid, self.manifest.pilot_seed)?)
    }
}

/// Generates `count` samples in parallel. Sample `i` depends only on
/// `(grid, pilot_seed, ranges, master_seed, i)`, so the result is identical
/// for any thread count.
pub fn generate_dataset(
    grid: &GridConfig,
    pilot_seed: u64,
    ranges: &ParamRanges,
    count: usize,
    master_seed: u64,
) -> Result<Dataset> {
    grid.validate()?;
    ranges.validate()?;
    if count == 0 {
        return Err(Error::usage("dataset count must be >= 1"));
    }
    if count > u32::MAX as usize {
        return Err(Error::usage("dataset count exceeds u32 range"));
    }
    let pilots = PilotPattern::generate(grid, pilot_seed)?;
    let pairs: Vec<(Sample, SampleMeta)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, salt::DATASET_SAMPLE, i as u64);
            simulate_sample(grid, &pilots, ranges, seed).map_err(Error::from)
        })
        .collect::<Result<_>>()?;
    let (samples, metas): (Vec<Sample>, Vec<SampleMeta>) = pairs.into_iter().unzip();
    Ok(Dataset {
        manifest: DatasetManifest {
            format_version: FORMAT_VERSION,
            grid: grid.clone(),
            pilot_seed,
            ranges: ranges.clone(),
            master_seed,
            samples: metas,
        },
        samples,
    })
}

/// Sibling manifest path for a `.bin` path (and vice versa).
fn sibling(path: &Path, ext: &str) -> PathBuf {
    let mut p = path.to_path_buf();
    p.set_extension(ext);
    p
}

/// Writes `<stem>.bin` and `<stem>.json` under `dir`; returns both paths.
pub fn write_dataset(dir: &Path, stem: &str, ds: &Dataset) -> Result<(PathBuf, PathBuf)> {
    let grid = &ds.manifest.grid;
    let (m, n) = (grid.num_subcarriers(), grid.num_symbols);
    if ds.samples.len() != ds.manifest.samples.len() {
        return Err(Error::data("dataset manifest and tensor counts differ"));
    }
    let bin_path = dir.join(format!("{stem}.bin"));
    let json_path = dir.join(format!("{stem}.json"));

    let file = std::fs::File::create(&bin_path).map_err(|e| io_err(&bin_path, e))?;
    let mut w = BufWriter::new(file);
    let werr = |e| io_err(&bin_path, e);
    w.write_all(&MAGIC).map_err(werr)?;
    for v in [FORMAT_VERSION, ds.samples.len() as u32, m as u32, n as u32] {
        w.write_all(&v.to_le_bytes()).map_err(werr)?;
    }
    for s in &ds.samples {
        let plane = 2 * m * n;
        if s.input.len() != plane || s.label_h.len() != plane {
            return Err(Error::data("sample tensor length does not match the grid"));
        }
        for &v in s.input.iter().chain(&s.label_h) {
            w.write_all(&v.to_le_bytes()).map_err(werr)?;
        }
        w.write_all(&s.label_noise.to_le_bytes()).map_err(werr)?;
    }
    w.flush().map_err(werr)?;

    let mut json = serde_json::to_string_pretty(&ds.manifest)
        .map_err(|e| Error::data(format!("manifest serialization: {e}")))?;
    json.push('\n');
    std::fs::write(&json_path, json).map_err(|e| io_err(&json_path, e))?;
    Ok((bin_path, json_path))
}

/// Loads a dataset given its `.bin` (or `.json`) path; the sibling file must
/// sit next to it.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let (bin_path, json_path) = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => (sibling(path, "bin"), path.to_path_buf()),
        _ => (path.to_path_buf(), sibling(path, "json")),
    };
    let manifest_text =
        std::fs::read_to_string(&json_path).map_err(|e| io_err(&json_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&manifest_text)
        .map_err(|e| Error::data(format!("{}: {e}", json_path.display())))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::data(format!(
            "unsupported dataset format version {}",
            manifest.format_version
        )));
    }
    manifest.grid.validate()?;

    let bytes = std::fs::read(&bin_path).map_err(|e| io_err(&bin_path, e))?;
    let fail = |msg: &str| Error::Data(format!("{}: {msg}", bin_path.display()));
    if bytes.len() < 20 {
        return Err(fail("file shorter than header"));
    }
    if bytes[..4] != MAGIC {
        return Err(fail("bad magic"));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let (version, count, m, n) =
        (u32_at(4), u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
    if version != FORMAT_VERSION {
        return Err(fail("unsupported format version"));
    }
    if m != manifest.grid.num_subcarriers() || n != manifest.grid.num_symbols {
        return Err(fail("grid dimensions disagree with the manifest"));
    }
    if count != manifest.samples.len() {
        return Err(fail("sample count disagrees with the manifest"));
    }
    let plane = 2 * m * n;
    let sample_bytes = 4 * (2 * plane + 1);
    let expect = 20 + count * sample_bytes;
    if bytes.len() != expect {
        return Err(fail(&format!("expected {expect} bytes, found {}", bytes.len())));
    }

    let read_f32s = |off: usize, len: usize| -> Vec<f32> {
        bytes[off..off + 4 * len]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let base = 20 + i * sample_bytes;
        samples.push(Sample {
            input: read_f32s(base, plane),
            label_h: read_f32s(base + 4 * plane, plane),
            label_noise: f32::from_le_bytes(
                bytes[base + 8 * plane..base + 8 * plane + 4].try_into().unwrap(),
            ),
        });
    }
    Ok(Dataset { manifest, samples })
}
