use thiserror::Error;

/// Errors produced by the analytic and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature on [{lo}, {hi}] did not converge: estimated error {error:.3e} after {panels} panels")]
    Quadrature {
        lo: f64,
        hi: f64,
        error: f64,
        panels: usize,
    },

    #[error("series did not converge after {terms} terms")]
    Series { terms: usize },

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("terms of size {magnitude:.3e} cancel; the result could be off by {bound:.3e}")]
    Cancellation { magnitude: f64, bound: f64 },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
