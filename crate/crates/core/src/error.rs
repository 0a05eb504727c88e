use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in layer `{layer}`: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        layer: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid layer spec `{layer}`: {reason}")]
    InvalidLayer { layer: String, reason: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite loss")]
    NonFiniteLoss,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("unsupported architecture ({arch}, {depth}); supported: {supported}")]
    UnsupportedArchitecture {
        arch: String,
        depth: usize,
        supported: String,
    },

    #[error("unknown layer `{0}`")]
    UnknownLayer(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: Vec<u8> },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("checksum mismatch: header says {expected:08x}, payload is {actual:08x}")]
    ChecksumMismatch { expected: u32, actual: u32 },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("dataset format error: {0}")]
    DatasetFormat(String),

    #[error("failing set is empty")]
    EmptyFailingSet,

    #[error("fitness returned non-finite value at iteration {iteration}, particle {particle}")]
    NonFiniteFitness { iteration: usize, particle: usize },

    #[error("invalid constraint spec: {0}")]
    InvalidConstraint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
