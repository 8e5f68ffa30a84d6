use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cell ({row}, {col}) is outside the {n}x{n} grid")]
    OutOfRange { row: usize, col: usize, n: usize },

    #[error("cell ({row}, {col}) appears more than once")]
    DuplicateCell { row: usize, col: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    DimensionMismatch {
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("rank {rank} is not in 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("matrix has numerical rank below {0}")]
    RankDeficient(usize),

    #[error("empty sample set")]
    EmptySamples,

    #[error("only {available} cells have positive weight, {requested} requested")]
    InsufficientSupport { available: usize, requested: usize },

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the user's input or configuration rather
    /// than by a failure while computing.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Config(_)
                | Error::Format { .. }
                | Error::OutOfRange { .. }
                | Error::DuplicateCell { .. }
                | Error::DimensionMismatch { .. }
                | Error::RankOutOfRange { .. }
        )
    }
}
