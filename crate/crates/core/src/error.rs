use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("negative coordinate {value} at index {index}; kernel requires nonnegative inputs")]
    NegativeCoordinate { index: usize, value: f64 },

    #[error("joint_label kernel requires labeled points")]
    MissingLabel,

    #[error("invalid kernel spec: {0}")]
    InvalidKernel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least 2 sample sets, got {0}")]
    TooFewSets(usize),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("solver did not converge after {epochs} epochs (duality gap {gap:e})")]
    NotConverged { epochs: usize, gap: f64 },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("KL divergence requires an unsigned sample set, got a signed-weight embedding")]
    SignedPrediction,

    #[error("density grids differ")]
    GridMismatch,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("content hash mismatch for {path}")]
    HashMismatch { path: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line tool.
    ///
    /// 1 for I/O and parse failures, 2 for contract violations, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Parse { .. } => 1,
            Error::HashMismatch { .. } => 1,
            Error::Singular(_) | Error::NotConverged { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
