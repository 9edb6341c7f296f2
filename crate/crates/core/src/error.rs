use std::path::PathBuf;

/// Errors raised by the geometry kernel, the trainers and the data layer.
#[derive(Debug, thiserror::Error)]
pub enum HyperError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("point outside the Poincaré ball: c·‖x‖² = {scaled_norm_sq} (must be < 1)")]
    OutsideBall { scaled_norm_sq: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite gradient for row {row}")]
    NonFiniteGradient { row: usize },

    #[error("cannot sample a negative for user {user}: every candidate is a positive")]
    Unsatisfiable { user: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("no evaluable users")]
    NoEvaluableUsers,

    /// The message already carries the OS reason, so no source is chained.
    #[error("{path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },

    #[error("{path}: {malformed} of {total} lines malformed (first at line {first_line}: {first_message})")]
    TooManyMalformed {
        path: PathBuf,
        malformed: usize,
        total: usize,
        first_line: usize,
        first_message: String,
    },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

impl HyperError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HyperError::Io {
            path: path.into(),
            cause: source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HyperError>;
