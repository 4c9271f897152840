//! Error type shared by the analytic modules.

use thiserror::Error;

/// Errors raised by the closed-form models and sizing tools.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    /// An argument is outside the domain of the model.
    #[error("domain error: {0}")]
    Domain(String),
    /// A lookup table has no data.
    #[error("empty map: {0}")]
    EmptyMap(String),
    /// A tabular input is malformed.
    #[error("malformed table at line {line}: {msg}")]
    Table { line: usize, msg: String },
    /// No solution exists with the requested constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

/// Result alias for this crate.
pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn domain(msg: impl Into<String>) -> CoreError {
    CoreError::Domain(msg.into())
}

pub(crate) fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite and > 0, got {v}")))
    }
}
