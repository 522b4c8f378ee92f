//! GP posterior predictions and the negative log marginal likelihood.
//!
//! All solves go through a single Cholesky factorization of K; no explicit
//! inverse is formed on the prediction path. A failed factorization is a
//! recoverable typed error so hyperparameter search can reject the point
//! and continue.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{covariance_matrix, cross_covariance, Hyperparameters, InputPoint};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingSet {
    pub points: Vec<InputPoint>,
    pub observations: Vec<f64>,
}

impl TrainingSet {
    pub fn new(points: Vec<InputPoint>, observations: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("training set must be non-empty".into()));
        }
        if points.len() != observations.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} observations",
                points.len(),
                observations.len()
            )));
        }
        let d = points[0].dim();
        if points.iter().any(|p| p.dim() != d) {
            return Err(Error::InvalidInput("points of mixed dimension".into()));
        }
        if observations.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite {
                context: "observations",
            });
        }
        Ok(Self {
            points,
            observations,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }
}

/// Variance clamp: round-off can make the subtracted quadratic form exceed
/// the prior variance by a hair. Anything within this relative band is
/// clamped to zero; anything more negative is a bug and raises.
const VARIANCE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorPrediction {
    pub mean: f64,
    pub variance: f64,
}

impl PosteriorPrediction {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// A trained GP: training data, hyperparameters, and cached factorization.
/// Immutable after construction, safe to share across threads.
#[derive(Debug, Clone)]
pub struct FittedGP {
    training: TrainingSet,
    theta: Hyperparameters,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl FittedGP {
    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn theta(&self) -> &Hyperparameters {
        &self.theta
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Factorize K(X, X) and precompute alpha = K^{-1} y (zero prior mean).
pub fn fit(training: &TrainingSet, theta: &Hyperparameters) -> Result<FittedGP> {
    let k = covariance_matrix(&training.points, theta)?;
    let chol = Cholesky::new(k).ok_or(Error::NotPositiveDefinite { theta: *theta })?;
    let y = DVector::from_column_slice(&training.observations);
    let alpha = chol.solve(&y);
    Ok(FittedGP {
        training: training.clone(),
        theta: *theta,
        chol,
        alpha,
    })
}

/// Posterior mean and variance at a query point.
///
/// mean = k(x*)^T alpha, variance = (sigma^2 + sigma_n^2) - k(x*)^T K^{-1} k(x*).
/// The prior variance at the query is the kernel diagonal, so the variance
/// is that of a noisy observation at x*.
pub fn predict(gp: &FittedGP, x_star: &InputPoint) -> Result<PosteriorPrediction> {
    if x_star.dim() != gp.training.dim() {
        return Err(Error::DimensionMismatch {
            expected: gp.training.dim(),
            got: x_star.dim(),
        });
    }
    let k_star = cross_covariance(&gp.training.points, x_star, &gp.theta)?;
    let mean = k_star.dot(&gp.alpha);
    // v = L^{-1} k*, quadratic form = |v|^2
    let mut v = k_star;
    gp.chol.l_dirty().solve_lower_triangular_mut(&mut v);
    let prior = gp.theta.prior_variance();
    let mut variance = prior - v.norm_squared();
    if variance < 0.0 {
        if variance >= -VARIANCE_SLACK * prior {
            variance = 0.0;
        } else {
            return Err(Error::NonFinite {
                context: "negative posterior variance beyond round-off band",
            });
        }
    }
    Ok(PosteriorPrediction { mean, variance })
}

/// Negative log marginal likelihood (zero prior mean):
/// 0.5 [ y^T K^{-1} y + log|K| + N log 2pi ].
pub fn negative_log_likelihood(training: &TrainingSet, theta: &Hyperparameters) -> Result<f64> {
    let gp = fit(training, theta)?;
    Ok(nll_of_fit(&gp))
}

pub(crate) fn nll_of_fit(gp: &FittedGP) -> f64 {
    let y = DVector::from_column_slice(&gp.training.observations);
    let n = gp.training.len() as f64;
    0.5 * (y.dot(&gp.alpha) + gp.log_det() + n * (2.0 * std::f64::consts::PI).ln())
}

/// Gradient of the NLL with respect to (log_l, log_sigma, log_sigma_n) via
/// the trace identity dNLL/dp = 0.5 tr[(K^{-1} - alpha alpha^T) dK/dp],
/// chain-ruled into log-space.
pub fn nll_gradient(training: &TrainingSet, theta: &Hyperparameters) -> Result<[f64; 3]> {
    let n = training.len();
    let k = covariance_matrix(&training.points, theta)?;
    let chol = Cholesky::new(k).ok_or(Error::NotPositiveDefinite { theta: *theta })?;
    let y = DVector::from_column_slice(&training.observations);
    let alpha = chol.solve(&y);
    let k_inv = chol.inverse();

    let l = theta.length_scale();
    let sigma2 = theta.sigma() * theta.sigma();
    let sn2 = theta.sigma_n() * theta.sigma_n();

    // dK/dlog_l, dK/dlog_sigma, dK/dlog_sigma_n assembled entrywise.
    let mut grads = [0.0f64; 3];
    let mut dk = DMatrix::zeros(n, n);
    #[allow(clippy::needless_range_loop)]
    for param in 0..3 {
        for i in 0..n {
            for j in 0..n {
                let r2: f64 = training.points[i]
                    .coords()
                    .iter()
                    .zip(training.points[j].coords())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let se = sigma2 * (-r2 / (2.0 * l * l)).exp();
                dk[(i, j)] = match param {
                    0 => se * r2 / (l * l),
                    1 => 2.0 * se,
                    _ => {
                        if i == j {
                            2.0 * sn2
                        } else {
                            0.0
                        }
                    }
                };
            }
        }
        let trace_term: f64 = (0..n)
            .map(|i| (0..n).map(|j| k_inv[(i, j)] * dk[(j, i)]).sum::<f64>())
            .sum();
        let data_term = (dk.clone() * &alpha).dot(&alpha);
        grads[param] = 0.5 * (trace_term - data_term);
    }
    Ok(grads)
}
