//! Decision forests to programmable interval words.
//!
//! A forest is read from its JSON interchange form, every root-to-leaf path
//! becomes one word of per-feature intervals, bounds are normalized by the
//! training ranges, quantized onto the conductance levels and the resulting
//! rows are cut into match-line tiles.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod compile;
pub mod dataset;
pub mod model;
pub mod stats;
pub mod synth;

pub use compile::{
    denormalize, extract_paths, normalize, program_rows, tile, CompiledForest, IntervalWord, Tile,
    DEFAULT_MAX_SEGMENT,
};
pub use dataset::Dataset;
pub use model::{ForestModel, ModelDocument, Node, TreeModel};
pub use stats::{measured_mismatch_stats, MismatchStats};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("invalid model document: {0}")]
    Json(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("tree {tree}, node {node}: {msg}")]
    Structure { tree: usize, node: usize, msg: String },
    #[error("tree {tree}, leaf node {node}: empty interval on feature {feature}")]
    EmptyLeaf {
        tree: usize,
        node: usize,
        feature: usize,
    },
    #[error("dataset: {0}")]
    Csv(String),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<CompileError>,
    },
}

impl CompileError {
    pub(crate) fn in_file(self, path: &Path) -> Self {
        CompileError::InFile {
            path: path.to_path_buf(),
            source: Box::new(self),
        }
    }
}
