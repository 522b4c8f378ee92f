//! Squared-exponential covariance kernel with additive observation noise.
//!
//! K(x, x') = sigma^2 exp(-|x - x'|^2 / (2 l^2)) + sigma_n^2 delta,
//! where delta is 1 only when x and x' refer to the *same observation*,
//! not merely coinciding coordinates. Duplicate training locations thus
//! receive independent noise, and cross-covariances to test points never
//! carry the noise term.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel hyperparameters (length-scale, signal std, noise std), stored in
/// log-space so that every real-valued triple maps to a positive set. The
/// optimizer works directly on these three logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub log_l: f64,
    pub log_sigma: f64,
    pub log_sigma_n: f64,
}

impl Hyperparameters {
    pub fn from_log(log_l: f64, log_sigma: f64, log_sigma_n: f64) -> Result<Self> {
        if !(log_l.is_finite() && log_sigma.is_finite() && log_sigma_n.is_finite()) {
            return Err(Error::NonFinite {
                context: "hyperparameters",
            });
        }
        Ok(Self {
            log_l,
            log_sigma,
            log_sigma_n,
        })
    }

    /// Construct from the positive-scale values (l, sigma, sigma_n).
    pub fn from_positive(l: f64, sigma: f64, sigma_n: f64) -> Result<Self> {
        if !(l > 0.0 && sigma > 0.0 && sigma_n >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "scales must be positive (sigma_n may be 0): l={l}, sigma={sigma}, sigma_n={sigma_n}"
            )));
        }
        // sigma_n = 0 has no finite log; pin it to a log whose exp squares
        // to an exact zero so noise-free kernels are representable.
        let log_sigma_n = if sigma_n == 0.0 { -745.0 } else { sigma_n.ln() };
        Self::from_log(l.ln(), sigma.ln(), log_sigma_n)
    }

    pub fn length_scale(&self) -> f64 {
        self.log_l.exp()
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    pub fn sigma_n(&self) -> f64 {
        self.log_sigma_n.exp()
    }

    /// Diagonal value of the kernel: sigma^2 + sigma_n^2.
    pub fn prior_variance(&self) -> f64 {
        let s = self.sigma();
        let sn = self.sigma_n();
        s * s + sn * sn
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.log_l, self.log_sigma, self.log_sigma_n]
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self> {
        Self::from_log(v[0], v[1], v[2])
    }
}

/// A location in the input domain D, a subset of R^d with d >= 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPoint(pub Vec<f64>);

impl InputPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("input point must have d >= 1".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: "input point coordinates",
            });
        }
        Ok(Self(coords))
    }

    /// Convenience constructor for the d = 1 case.
    pub fn scalar(x: f64) -> Self {
        Self(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    fn squared_distance(&self, other: &InputPoint) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

/// Kernel evaluation. `same_index` selects the Kronecker-delta noise term;
/// it marks identity of observation, not coordinate equality.
pub fn kernel_eval(
    a: &InputPoint,
    b: &InputPoint,
    theta: &Hyperparameters,
    same_index: bool,
) -> Result<f64> {
    let r2 = a.squared_distance(b)?;
    let l = theta.length_scale();
    let sigma2 = theta.sigma() * theta.sigma();
    let mut v = sigma2 * (-r2 / (2.0 * l * l)).exp();
    if same_index {
        let sn = theta.sigma_n();
        v += sn * sn;
    }
    if !v.is_finite() {
        return Err(Error::NonFinite {
            context: "kernel evaluation",
        });
    }
    Ok(v)
}

/// Covariance matrix K over a point set. Symmetric by construction; the
/// diagonal carries the noise term.
pub fn covariance_matrix(points: &[InputPoint], theta: &Hyperparameters) -> Result<DMatrix<f64>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty point set".into()));
    }
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel_eval(&points[i], &points[j], theta, i == j)?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Noise-free cross-covariance vector k(x*) between training points and a
/// query point.
pub fn cross_covariance(
    points: &[InputPoint],
    x_star: &InputPoint,
    theta: &Hyperparameters,
) -> Result<DVector<f64>> {
    let l = theta.length_scale();
    let sigma2 = theta.sigma() * theta.sigma();
    let mut k = DVector::zeros(points.len());
    for (i, p) in points.iter().enumerate() {
        let r2 = p.squared_distance(x_star)?;
        k[i] = sigma2 * (-r2 / (2.0 * l * l)).exp();
    }
    Ok(k)
}
