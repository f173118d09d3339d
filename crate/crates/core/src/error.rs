use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Grid side is not a power of two, or two grids disagree in size.
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Newton iteration for the rate function did not reach the target moment.
    #[error("target moment not attained after {iterations} Newton steps (residual {residual:.3e})")]
    BoundaryMoment { iterations: usize, residual: f64 },

    #[error("exhaustive enumeration refused for n = {n} (limit {limit})")]
    EnumerationTooLarge { n: usize, limit: usize },

    #[error("no training dyads remain after holdout")]
    NoTrainingData,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::BoundaryMoment { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
