use thiserror::Error;

/// Errors surfaced by samplers, stream generators and quadrature engines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A degenerate increment law (|E e^{iX}| = 1) where a nondegenerate one
    /// is required.
    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// An operation needed more realized arrivals than the stream holds.
    #[error("arrivals realized to {realized}, operation needs {needed}")]
    NotRealized { needed: usize, realized: usize },

    #[error("improper integral did not converge: {0}")]
    NonConvergent(String),

    #[error("quadrature achieved {achieved:e}, requested {requested:e}")]
    Tolerance { achieved: f64, requested: f64 },

    #[error("unsupported combination: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
