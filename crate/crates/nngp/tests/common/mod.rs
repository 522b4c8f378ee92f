//! Shared helpers for the integration suites: a tiny deterministic RNG,
//! random GP instance generation, and a dense explicit-inverse oracle that
//! shares no linear-algebra code with the library under test.

use nngp::{kernel_eval, Hyperparameters, InputPoint, TrainingSet};

/// splitmix64: deterministic, seedable, and independent of the library's
/// RNG stack so oracle comparisons cannot share a failure mode.
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn usize_in(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() as usize) % (hi - lo + 1)
    }
}

/// Random instance: N <= 8 points in d <= 3 dimensions with well-separated
/// coordinates, noisy observations, and a valid hyperparameter triple.
pub fn random_instance(rng: &mut TestRng) -> (TrainingSet, Hyperparameters) {
    let n = rng.usize_in(1, 8);
    let d = rng.usize_in(1, 3);
    let mut points = Vec::with_capacity(n);
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let coords: Vec<f64> = (0..d).map(|_| rng.range(-2.0, 2.0)).collect();
        points.push(InputPoint::new(coords).unwrap());
        obs.push(rng.range(-2.0, 2.0));
    }
    let theta = Hyperparameters::from_log(
        rng.range(-1.5, 1.0),
        rng.range(-1.0, 1.0),
        rng.range(-3.0, 0.0),
    )
    .unwrap();
    (TrainingSet::new(points, obs).unwrap(), theta)
}

/// Dense Gauss-Jordan inverse with partial pivoting, plus log-determinant
/// from the pivots. Quadratic-cost reference implementation only.
pub fn invert_dense(k: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = k.len();
    let mut a: Vec<Vec<f64>> = k.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut log_det = 0.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let pivot = a[col][col];
        assert!(pivot != 0.0, "oracle: singular matrix");
        // Row swaps can flip pivot signs; a covariance matrix has a
        // positive determinant, so |pivots| carry the log-determinant.
        log_det += pivot.abs().ln();
        for j in 0..n {
            a[col][j] /= pivot;
            inv[col][j] /= pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            for j in 0..n {
                a[row][j] -= factor * a[col][j];
                inv[row][j] -= factor * inv[col][j];
            }
        }
    }
    (inv, log_det)
}

fn dense_covariance(training: &TrainingSet, theta: &Hyperparameters) -> Vec<Vec<f64>> {
    let n = training.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    kernel_eval(&training.points[i], &training.points[j], theta, i == j).unwrap()
                })
                .collect()
        })
        .collect()
}

/// Posterior mean and variance from the explicit inverse.
pub fn oracle_predict(
    training: &TrainingSet,
    theta: &Hyperparameters,
    x_star: &InputPoint,
) -> (f64, f64) {
    let n = training.len();
    let (inv, _) = invert_dense(&dense_covariance(training, theta));
    let k_star: Vec<f64> = training
        .points
        .iter()
        .map(|p| kernel_eval(p, x_star, theta, false).unwrap())
        .collect();
    let mut mean = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            mean += k_star[i] * inv[i][j] * training.observations[j];
            quad += k_star[i] * inv[i][j] * k_star[j];
        }
    }
    let prior = theta.sigma() * theta.sigma() + theta.sigma_n() * theta.sigma_n();
    (mean, prior - quad)
}

/// NLL from the explicit inverse and pivot log-determinant.
pub fn oracle_nll(training: &TrainingSet, theta: &Hyperparameters) -> f64 {
    let n = training.len();
    let (inv, log_det) = invert_dense(&dense_covariance(training, theta));
    let mut quad = 0.0;
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        for j in 0..n {
            quad += training.observations[i] * inv[i][j] * training.observations[j];
        }
    }
    0.5 * (quad + log_det + n as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// |a - b| measured relative to max(1, |b|).
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
