use thiserror::Error;

/// Errors raised by the geometry, algebra and comparison layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("distance gradient undefined at the reference point (rho = {rho:e})")]
    UndefinedGradient { rho: f64 },

    #[error("degenerate immersion: metric determinant {det:e} at {at:?}")]
    Degenerate { det: f64, at: Vec<f64> },

    #[error("signature error: {0}")]
    Signature(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no valid samples: all {skipped} grid points were skipped")]
    EmptySample { skipped: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("consistency error: {what} disagree by {gap:e}")]
    Consistency { what: String, gap: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
