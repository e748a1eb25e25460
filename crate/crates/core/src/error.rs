use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller-supplied argument violated an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty potential trace")]
    EmptyTrace,

    #[error("position {x} outside concatenation of length {total}")]
    OutOfRange { x: f64, total: f64 },

    /// The backward Riccati integration did not settle: the horizon is too
    /// short for the imaginary part of the energy.
    #[error("m-function did not contract: error estimate {estimate:e} exceeds limit {limit:e}")]
    NonContraction { estimate: f64, limit: f64 },

    #[error("m-function lost the Herglotz property: Im m = {im_m:e}")]
    NotHerglotz { im_m: f64 },

    /// Partition refinement hit its cap before the variation bound held.
    #[error("variation bound unresolved: max box variation {variation:e} with counts {counts:?}")]
    UnresolvedVariation { variation: f64, counts: Vec<usize> },

    #[error("sampling function must be continuous for this operation")]
    NotContinuous,
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
