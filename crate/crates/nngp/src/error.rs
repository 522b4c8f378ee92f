use crate::kernel::Hyperparameters;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("covariance matrix is not positive definite at theta = {theta:?}")]
    NotPositiveDefinite { theta: Hyperparameters },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "no feasible solution found after {restarts} restarts (best max violation {max_violation:.3e})"
    )]
    NoFeasibleSolution {
        restarts: usize,
        max_violation: f64,
        best_theta: Hyperparameters,
        best_nll: f64,
    },

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),
}
