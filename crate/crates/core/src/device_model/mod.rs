//! Device characteristics: lookup tables, the synthetic generator, the bound
//! to conductance map and technology constants.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod conductance;
pub mod io;
pub mod lut;
pub mod synth;
pub mod tech;

pub use conductance::{bound_to_conductance, conductance_to_bound, quantize_conductance};
pub use io::{load_luts, save_luts};
pub use lut::{ArchKind, Grid2, LutSet, Polarity, PulldownLut, TransferLut};
pub use synth::{default_luts, gen_synthetic_luts, GridSizes, PulldownParams};
pub use tech::TechParams;

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("axis `{axis}` needs at least 2 points, has {len}")]
    AxisTooShort { axis: &'static str, len: usize },
    #[error("axis `{axis}` is not strictly increasing at index {index}")]
    NonMonotoneAxis { axis: &'static str, index: usize },
    #[error("grid has {found} values, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("grid value {value} at row {row}, column {col}: {reason}")]
    ValueOutOfRange {
        row: usize,
        col: usize,
        value: f64,
        reason: &'static str,
    },
    #[error("transfer table is not monotone along v_dl (row {row}, column {col})")]
    NonMonotoneTransfer { row: usize, col: usize },
    #[error("inconsistent LUT set: {0}")]
    Inconsistent(String),
    #[error("unknown cell kind `{0}` (expected salm, 6t2m or ideal)")]
    UnknownArchKind(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<DeviceError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid technology parameters: {0}")]
    InvalidTech(String),
    #[error("invalid synthetic LUT request: {0}")]
    InvalidSynth(String),
    #[error("domain error: {0}")]
    Domain(String),
}

impl DeviceError {
    pub(crate) fn in_file(self, path: &Path) -> Self {
        DeviceError::InFile {
            path: path.to_path_buf(),
            source: Box::new(self),
        }
    }
}
