use thiserror::Error;

/// Errors raised by the geometric, surrogate and optimization layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate projection: ambient vector norm {norm:e} is too small to project")]
    DegenerateProjection { norm: f64 },

    #[error("ambiguous subspace: eigenvalue gap {gap:e} between positions p and p+1")]
    AmbiguousSubspace { gap: f64 },

    #[error("manifold kind mismatch: {left} vs {right}")]
    KindMismatch { left: String, right: String },

    #[error("ill-conditioned model: Cholesky failed with jitter up to {jitter:e}")]
    IllConditioned { jitter: f64 },

    #[error("hyperparameter fitting failed on every restart")]
    FittingFailed,

    #[error("empty neighborhood: all kernel weights fall below {threshold:e}")]
    EmptyNeighborhood { threshold: f64 },

    #[error("objective returned a non-finite value ({value}) at iteration {iteration}")]
    NonFiniteObjective { value: f64, iteration: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
