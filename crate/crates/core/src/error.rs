use thiserror::Error;

/// Errors raised by slicing, kernels, metrics, flows, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The circular defining function has no gradient at its center `s * theta`.
    #[error("gradient undefined at the center of the circular slice")]
    Singularity,

    /// A slice value left the admissible range `[-(T - sigma), T - sigma]` of the cumulative operator.
    #[error("slice value {value} outside admissible range |f| <= {limit} (T - sigma)")]
    RangeViolation { value: f64, limit: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("flow diverged at iteration {iteration} (eta = {eta})")]
    Diverged { iteration: usize, eta: f64 },

    #[error("problem size {n} exceeds exact solver budget {max}; subsample the inputs")]
    BudgetExceeded { n: usize, max: usize },

    #[error("csv line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
