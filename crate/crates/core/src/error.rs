use thiserror::Error;

/// Errors produced by the solver suite.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("map singularity: {0}")]
    Singularity(String),

    #[error("Newton iteration did not converge after {iterations} iterations (last update norm {update_norm:.3e})")]
    NonConvergence { iterations: usize, update_norm: f64 },

    #[error("singular Jacobian at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("density became non-positive at Newton iteration {iteration} even at minimum damping")]
    NegativeDensity { iteration: usize },

    #[error("trajectory integration failed: {0}")]
    StepFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
