use thiserror::Error;

/// Errors produced anywhere in the labeling toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sinkhorn did not converge after {iterations} iterations (marginal residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("NaN encountered during sinkhorn scaling at iteration {iteration}; try a larger epsilon")]
    NumericalBreakdown { iteration: usize },

    #[error("infeasible mask: {0}")]
    InfeasibleMask(String),

    #[error("instance too large for the exact oracle: {rows}x{cols} (limit 64 cells)")]
    InstanceTooLarge { rows: usize, cols: usize },

    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("online reward scale is already frozen at {0}")]
    ScaleFrozen(f64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Solver-side failures, as opposed to bad data or bad configuration.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::NumericalBreakdown { .. } | Error::InfeasibleMask(_)
        )
    }
}
