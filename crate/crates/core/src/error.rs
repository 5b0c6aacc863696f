use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid resolution too coarse: n_cells = {0}, need at least 8")]
    Resolution(usize),

    #[error("grid mismatch: expected {expected} nodes, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("derivative order {order} is not compatible with boundary scheme {bc}")]
    IncompatibleBc { order: usize, bc: &'static str },

    #[error("unsupported derivative order {0} (expected 1..=4)")]
    Order(usize),

    #[error("linear solve failed: pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("overflow while evaluating the nonlinear terms")]
    Overflow,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("blow-up time fit failed: {0}")]
    FitFailed(String),

    #[error("exact solution violates the {0} boundary conditions")]
    BoundaryViolation(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
