//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("fractional order must satisfy 0 < s < 1, got {0}")]
    InvalidOrder(f64),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("assumption {name} violated: {detail}")]
    AssumptionViolated { name: String, detail: String },

    #[error("projection undefined for the zero field")]
    ZeroField,

    #[error("Nehari projection failed: {0}")]
    ProjectionFailed(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureFailed(String),

    #[error("grid too large for the direct double sum: {0}")]
    GridTooLarge(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("time integration aborted: {0}")]
    BlowUp(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
