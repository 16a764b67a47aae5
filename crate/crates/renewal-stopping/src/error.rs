//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by configuration, distribution queries and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid distribution or payoff-function parameters.
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    /// A problem specification that violates a solver precondition.
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),

    /// A query outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A closed-form rule was asked for outside its regime.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Fixed-point iteration did not reach the requested tolerance.
    #[error("no convergence after {sweeps} sweeps (last residual {last_residual:e})")]
    NonConvergence {
        sweeps: usize,
        last_residual: f64,
        residuals: Vec<f64>,
    },

    /// Malformed configuration file.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
