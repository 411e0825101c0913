use thiserror::Error;

/// Error type shared by every module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Tensor file does not start with the `MMT1` magic bytes.
    #[error("bad magic: not an MMT1 tensor")]
    BadMagic,

    /// Tensor file declares a rank other than 2.
    #[error("unsupported tensor rank {0}")]
    BadRank(u32),

    /// Tensor file is shorter or longer than its header promises.
    #[error("tensor payload truncated or size mismatch")]
    Truncated,

    #[error("sequence too short: {frames} frames cannot carry a labeling that needs {needed}")]
    SequenceTooShort { frames: usize, needed: usize },

    #[error("invalid label {label} for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },

    #[error("unknown concept id {0}")]
    UnknownConcept(usize),

    #[error("invalid alignment path: {0}")]
    InvalidPath(String),

    #[error("degenerate target row at t={0}")]
    DegenerateRow(usize),

    #[error("no shared ground truth in batch")]
    NoSharedGroundTruth,

    #[error("empty reference transcript")]
    EmptyReference,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
