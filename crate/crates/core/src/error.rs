use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid label {label} at position {index} (expected 0 or 1)")]
    InvalidLabel { index: usize, label: i64 },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("split error: {0}")]
    Split(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("training diverged at epoch {epoch} (last finite epoch: {last_finite_epoch})")]
    Divergence { epoch: usize, last_finite_epoch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file error: {0}")]
    ModelFile(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Failures while reading a graph directory.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("malformed meta.json: {0}")]
    BadMeta(String),
    #[error("{file}: expected {expected} bytes, found {found}")]
    LengthMismatch { file: String, expected: u64, found: u64 },
    #[error("{file}: node id {id} out of range (num_nodes = {num_nodes})")]
    NodeOutOfRange { file: String, id: u64, num_nodes: usize },
    #[error("labels.i8: value {value} at node {node} not in {{-1, 0, 1}}")]
    BadLabel { node: usize, value: i8 },
    #[error("features.f32le: non-finite value at node {node}, column {col}")]
    NonFiniteFeature { node: usize, col: usize },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}
