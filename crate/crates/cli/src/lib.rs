//! Workbench library around [`gnce_core`]: dataset and checkpoint file
//! formats, training orchestration, MSE/BLER evaluation, and the `gnce` CLI.
//!
//! Everything here is deterministic by construction: given the same config
//! and seeds, every artifact this crate writes (datasets, checkpoints,
//! training logs, reports) is byte-identical across runs and thread counts.

pub mod bler;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod labels;
pub mod report;
pub mod trainer;

use gnce_core::chansim::ChanError;
use gnce_core::gnn::GnnError;

/// Workbench error, partitioned by the process exit code it maps to:
/// usage problems (bad flags, config values) exit 1, data problems (missing
/// or corrupt files, shape mismatches) exit 2, numeric failures (non-finite
/// values in training or evaluation) exit 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Data(_) => 2,
            Error::Numeric(_) => 3,
        }
    }
}

impl From<GnnError> for Error {
    fn from(e: GnnError) -> Self {
        match e {
            GnnError::Config(_) => Error::Usage(e.to_string()),
            GnnError::Shape(_) => Error::Data(e.to_string()),
            GnnError::NonFinite { .. } => Error::Numeric(e.to_string()),
        }
    }
}

impl From<ChanError> for Error {
    fn from(e: ChanError) -> Self {
        match e {
            ChanError::InvalidParams(_) => Error::Usage(e.to_string()),
            _ => Error::Data(e.to_string()),
        }
    }
}

impl From<gnce_core::grid::GridError> for Error {
    fn from(e: gnce_core::grid::GridError) -> Self {
        Error::Usage(e.to_string())
    }
}

impl From<gnce_core::graph::GraphError> for Error {
    fn from(e: gnce_core::graph::GraphError) -> Self {
        Error::Usage(e.to_string())
    }
}

impl From<gnce_core::estimators::EstimatorError> for Error {
    fn from(e: gnce_core::estimators::EstimatorError) -> Self {
        Error::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Wraps an IO error with the path it concerns (exit code 2).
pub fn io_err(path: &std::path::Path, e: std::io::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}
