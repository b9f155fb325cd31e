use thiserror::Error;

/// Errors raised by the reduction pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouthError {
    #[error("argument error: {0}")]
    Argument(String),

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("chart error: {0}")]
    Chart(String),

    #[error("{what} is singular or ill-conditioned (condition number {cond:e})")]
    Regularity { what: &'static str, cond: f64 },

    #[error("level set solve did not converge after {iterations} iterations (residual {residual:e})")]
    LevelSet { iterations: usize, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("integration failed at t = {t}: {cause}")]
    Integration { t: f64, cause: Box<RouthError> },
}

impl RouthError {
    /// True for failures of the numerics (regularity, Newton, chart exits) as
    /// opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            RouthError::Argument(_) | RouthError::Spec(_) | RouthError::Domain(_) => false,
            RouthError::Integration { cause, .. } => cause.is_numerical(),
            _ => true,
        }
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            RouthError::Argument(_) => "argument",
            RouthError::Spec(_) => "spec",
            RouthError::Chart(_) => "chart",
            RouthError::Regularity { .. } => "regularity",
            RouthError::LevelSet { .. } => "level_set",
            RouthError::Domain(_) => "domain",
            RouthError::NonFinite(_) => "non_finite",
            RouthError::Integration { .. } => "integration",
        }
    }
}

pub type Result<T, E = RouthError> = std::result::Result<T, E>;
