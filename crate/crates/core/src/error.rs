use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("set is unbounded")]
    UnboundedSet,
    #[error("set is empty")]
    EmptySet,
    #[error("point is not interior: {0}")]
    NotInterior(String),
    #[error("enumeration too large: {0} candidate subsets")]
    TooLarge(u128),
    #[error("function value is +inf at the point")]
    InfiniteValue,
    #[error("point is infeasible: residual {0:e}")]
    InfeasiblePoint(f64),
    #[error("not representable: {0}")]
    NotRepresentable(String),
    #[error("not differentiable: {0}")]
    NotDifferentiable(String),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("improper sum: expected value is +inf")]
    ImproperSum,
    #[error("dual cone is trivial: the constraint is vacuous")]
    DegenerateCone,
    #[error("qualification condition violated: {0}")]
    QcViolated(String),
    #[error("step leaves the domain near the point")]
    DomainBoundary,
    #[error("no feasible point on the grid")]
    NoFeasiblePoint,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("subproblem failed: {0}")]
    SubproblemFailure(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// Whether the error stems from bad input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::Numeric(_) | Error::TooLarge(_) | Error::NoConvergence | Error::SubproblemFailure(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
