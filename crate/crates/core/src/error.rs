use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate energy grid: {0}")]
    DegenerateGrid(String),

    #[error("sample {index} has energy {energy} at or above the top boundary {top}")]
    OutOfGrid { index: usize, energy: f64, top: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("sequence length mismatch: {0} vs {1}")]
    LengthMismatch(u32, u32),

    #[error("insufficient samples: {n} distances, need more than {needed}")]
    InsufficientSamples { n: usize, needed: usize },

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error("chains do not overlap in energy: {0}")]
    CoverageGap(String),

    #[error("state space too large to enumerate: {0} states")]
    TooLarge(u64),

    #[error("state outside the domain: {0}")]
    OutOfDomain(String),

    #[error("sample file mixes continuous and discrete states")]
    MixedStates,

    #[error("tree has no local density-of-states annotation")]
    Unannotated,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
