use thiserror::Error;

/// Errors raised by the lab operations.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("infeasible target: {0}")]
    InfeasibleTarget(String),

    #[error("solver failed after {iterations} iterations (moment residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("integration domain too small: boundary mass {boundary_mass:e} exceeds {limit:e}")]
    DomainTooSmall { boundary_mass: f64, limit: f64 },

    #[error("time {time} exceeds half the revival horizon {horizon} of the spectral grid")]
    RevivalHorizon { time: f64, horizon: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid<S: Into<String>>(msg: S) -> LabError {
    LabError::InvalidArgument(msg.into())
}
