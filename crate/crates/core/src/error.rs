use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The columns indexed by `support` (1-based) are numerically dependent.
    #[error("rank-deficient atom submatrix for support {support:?}")]
    RankDeficient { support: Vec<usize> },

    /// Exhaustive enumeration would exceed the configured budget.
    #[error("enumeration of {supports} supports exceeds budget {budget}; use the coherence bound instead")]
    BudgetExceeded { supports: u128, budget: u128 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed matrix file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for caller mistakes (bad flags, bad config) as opposed to domain failures.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::DimensionMismatch(_) | Error::Config(_) | Error::Format { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
