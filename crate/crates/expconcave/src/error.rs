use std::fmt;

/// Crate-wide error type.
///
/// The variants mirror the failure modes of the numerical operations:
/// malformed inputs, violated preconditions, iterative solvers that run out
/// of budget, and dimensions too large for grid quadrature.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is malformed; `field` names the offending input.
    InvalidInput { field: &'static str, message: String },
    /// A documented precondition does not hold.
    Precondition { message: String },
    /// An iterative solver exhausted its iteration budget.
    Convergence { residual: f64, iters: usize },
    /// The requested dimension exceeds what grid-based quadrature supports.
    UnsupportedDimension { dim: usize, max: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidInput { field, message } => {
                write!(f, "invalid input `{field}`: {message}")
            }
            Self::Precondition { message } => write!(f, "precondition violated: {message}"),
            Self::Convergence { residual, iters } => {
                write!(f, "no convergence after {iters} iterations (residual {residual:e})")
            }
            Self::UnsupportedDimension { dim, max } => {
                write!(f, "dimension {dim} unsupported (max {max})")
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Self::InvalidInput { field, message: message.into() }
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Self::Precondition { message: message.into() }
    }
}
