use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("unknown channel id `{0}`")]
    UnknownChannel(String),

    #[error("payload size mismatch for {file}: expected {expected} bytes, found {actual}")]
    PayloadSizeMismatch {
        file: String,
        expected: u64,
        actual: u64,
    },

    #[error("layout length mismatch: manifest declares {expected} channels, layout has {actual} entries")]
    LayoutLengthMismatch { expected: usize, actual: usize },

    #[error("checksum mismatch for {file}: manifest {expected:08x}, payload {actual:08x}")]
    ChecksumMismatch {
        file: String,
        expected: u32,
        actual: u32,
    },

    #[error("manifest field `{field}`: {message}")]
    Manifest { field: String, message: String },

    #[error("zero-variance channel {channel} in subject {subject}")]
    ZeroVariance { subject: String, channel: String },

    #[error("rank-deficient channel covariance for subject {subject} (min eigenvalue {min_eigenvalue:e})")]
    RankDeficient { subject: String, min_eigenvalue: f64 },

    #[error("too few samples to fit: {0}")]
    TooFewSamples(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("statistical test undefined: {0}")]
    TestUndefined(String),

    #[error("evaluation budget exceeded: {required} model evaluations requested, budget is {budget}")]
    Budget { required: u64, budget: u64 },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
