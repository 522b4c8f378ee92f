//! Gaussian process regression with probabilistic non-negativity
//! constraints enforced during hyperparameter fitting, plus a benchmark
//! harness comparing constrained and unconstrained fits over randomized
//! trials.

pub mod benchmark;
pub mod cli;
pub mod constrained;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod optimize;
pub mod stats;

pub use constrained::{
    check_feasibility, constraint_values, minimize_constrained, minimize_unconstrained,
    ConstraintSpec, FitResult, RestartPolicy, DEFAULT_THETA0, FEASIBILITY_TOL,
};
pub use error::{Error, Result};
pub use gp::{fit, negative_log_likelihood, nll_gradient, predict, FittedGP, PosteriorPrediction, TrainingSet};
pub use kernel::{covariance_matrix, cross_covariance, kernel_eval, Hyperparameters, InputPoint};
pub use stats::norm_ppf;
