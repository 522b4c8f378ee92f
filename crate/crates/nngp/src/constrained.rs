//! Constrained and unconstrained hyperparameter fitting.
//!
//! The constrained program minimizes the NLL subject to
//!   y*(x_c) + cdf_factor * s(x_c) >= 0        at each constraint point,
//!   eps - |y_j - y*(x_j)|        >= 0        at each training point,
//! over the log-hyperparameters. The absolute-value constraint is split
//! into two smooth inequalities. The solver is a sequential quadratic
//! programming loop (damped-BFGS Hessian model, finite-difference
//! constraint Jacobian, active-set QP subproblems, l1 merit line search)
//! plus a direct interpolation-regime construction used as a fallback when
//! the SQP iterates stall outside the feasible set. If a run ends
//! infeasible, the initial guess is perturbed with standard Gaussian noise
//! and the solve is repeated.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{self, TrainingSet};
use crate::kernel::{Hyperparameters, InputPoint};
use crate::optimize::{bfgs, BfgsOptions};
use crate::stats::norm_ppf;

/// Absolute tolerance below which a constraint value counts as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Central-difference step for constraint gradients, per log-parameter.
const FD_STEP: f64 = 1e-6;

/// Base initial guess (log l, log sigma, log sigma_n) for both fits.
pub const DEFAULT_THETA0: [f64; 3] = [-3.0, -3.0, -10.0];

/// Search box on the log-parameters. Trial points outside it are rejected
/// like factorization failures; the box is wide enough that realistic
/// optima never touch it.
const LOG_LOWER: f64 = -60.0;
const LOG_UPPER: f64 = 30.0;

fn theta_in_box(x: &[f64; 3]) -> Option<Hyperparameters> {
    if x.iter().any(|v| *v < LOG_LOWER || *v > LOG_UPPER) {
        return None;
    }
    Hyperparameters::from_array(*x).ok()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub constraint_points: Vec<InputPoint>,
    /// Phi^{-1}(eta); -2 corresponds to eta = 2.2%.
    pub cdf_factor: f64,
    /// Data-fit tolerance eps in |y_j - y*(x_j)| <= eps.
    pub data_fit_eps: f64,
}

impl ConstraintSpec {
    pub const DEFAULT_CDF_FACTOR: f64 = -2.0;
    pub const DEFAULT_DATA_FIT_EPS: f64 = 0.03;

    pub fn new(
        constraint_points: Vec<InputPoint>,
        cdf_factor: f64,
        data_fit_eps: f64,
    ) -> Result<Self> {
        if constraint_points.is_empty() {
            return Err(Error::InvalidInput(
                "need at least one constraint point".into(),
            ));
        }
        // Negated form rejects NaN as well.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(cdf_factor < 0.0) {
            return Err(Error::InvalidInput(format!(
                "cdf_factor must be negative, got {cdf_factor}"
            )));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(data_fit_eps > 0.0) {
            return Err(Error::InvalidInput(format!(
                "data_fit_eps must be positive, got {data_fit_eps}"
            )));
        }
        Ok(Self {
            constraint_points,
            cdf_factor,
            data_fit_eps,
        })
    }

    /// Experiment defaults: cdf_factor = -2, eps = 0.03.
    pub fn with_defaults(constraint_points: Vec<InputPoint>) -> Result<Self> {
        Self::new(
            constraint_points,
            Self::DEFAULT_CDF_FACTOR,
            Self::DEFAULT_DATA_FIT_EPS,
        )
    }

    /// Derive the CDF factor from a violation probability eta in (0, 0.5).
    pub fn from_eta(constraint_points: Vec<InputPoint>, eta: f64, data_fit_eps: f64) -> Result<Self> {
        let factor = norm_ppf(eta)?;
        Self::new(constraint_points, factor, data_fit_eps)
    }

    pub fn num_constraint_points(&self) -> usize {
        self.constraint_points.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: Hyperparameters,
    pub nll: f64,
    pub feasible: bool,
    pub max_violation: f64,
    pub restarts_used: usize,
}

#[derive(Debug, Clone)]
pub struct RestartPolicy {
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for RestartPolicy {
    fn default() -> Self {
        Self {
            max_restarts: 20,
            seed: 0,
        }
    }
}

/// The full constraint vector: m posterior-nonnegativity entries
/// followed by N data-fit entries. All entries >= 0 iff theta is feasible.
pub fn constraint_values(
    training: &TrainingSet,
    theta: &Hyperparameters,
    spec: &ConstraintSpec,
) -> Result<Vec<f64>> {
    let gp = gp::fit(training, theta)?;
    let mut values = Vec::with_capacity(spec.constraint_points.len() + training.len());
    for xc in &spec.constraint_points {
        let p = gp::predict(&gp, xc)?;
        values.push(p.mean + spec.cdf_factor * p.std());
    }
    for (xj, yj) in training.points.iter().zip(&training.observations) {
        let p = gp::predict(&gp, xj)?;
        values.push(spec.data_fit_eps - (yj - p.mean).abs());
    }
    Ok(values)
}

pub fn check_feasibility(
    training: &TrainingSet,
    theta: &Hyperparameters,
    spec: &ConstraintSpec,
) -> (bool, f64) {
    match constraint_values(training, theta, spec) {
        Ok(values) => {
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            (min >= -FEASIBILITY_TOL, (-min).max(0.0))
        }
        Err(_) => (false, f64::INFINITY),
    }
}

/// Smooth constraint vector used by the solver: the |.| data-fit entries are
/// split into two one-sided inequalities each (m + 2N entries total).
fn smooth_constraints(
    training: &TrainingSet,
    theta: &Hyperparameters,
    spec: &ConstraintSpec,
) -> Option<(f64, Vec<f64>)> {
    let gp = gp::fit(training, theta).ok()?;
    let nll = gp::nll_of_fit(&gp);
    let mut values = Vec::with_capacity(spec.constraint_points.len() + 2 * training.len());
    for xc in &spec.constraint_points {
        let p = gp::predict(&gp, xc).ok()?;
        values.push(p.mean + spec.cdf_factor * p.std());
    }
    for (xj, yj) in training.points.iter().zip(&training.observations) {
        let p = gp::predict(&gp, xj).ok()?;
        values.push(spec.data_fit_eps - (yj - p.mean));
        values.push(spec.data_fit_eps + (yj - p.mean));
    }
    if !nll.is_finite() || values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((nll, values))
}

/// Minimize the NLL without constraints via BFGS with the analytic
/// gradient. When a spec is supplied the result carries constraint
/// diagnostics; otherwise it is reported feasible by convention.
pub fn minimize_unconstrained(
    training: &TrainingSet,
    theta0: &Hyperparameters,
    diagnostics: Option<&ConstraintSpec>,
) -> Result<FitResult> {
    let f = |x: &[f64; 3]| {
        let t = theta_in_box(x)?;
        gp::negative_log_likelihood(training, &t).ok().filter(|v| v.is_finite())
    };
    let g = |x: &[f64; 3]| {
        let t = theta_in_box(x)?;
        gp::nll_gradient(training, &t).ok()
    };
    let res = bfgs(theta0.as_array(), f, g, &BfgsOptions::default()).ok_or(
        Error::NotPositiveDefinite { theta: *theta0 },
    )?;
    let theta = Hyperparameters::from_array(res.x)?;
    let (feasible, max_violation) = match diagnostics {
        Some(spec) => check_feasibility(training, &theta, spec),
        None => (true, 0.0),
    };
    Ok(FitResult {
        theta,
        nll: res.value,
        feasible,
        max_violation,
        restarts_used: 0,
    })
}

/// Largest violation across a constraint vector (0 when feasible).
fn violation_of(c: &[f64]) -> f64 {
    c.iter().fold(0.0f64, |m, ci| m.max(-ci))
}

/// Total violation, used by the l1 merit function.
fn violation_sum(c: &[f64]) -> f64 {
    c.iter().map(|ci| (-ci).max(0.0)).sum()
}

const SQP_MAX_ITERS: usize = 150;
const SQP_STEP_TOL: f64 = 1e-8;
/// At most this many near-active constraints enter the QP enumeration.
const QP_CANDIDATE_CAP: usize = 25;

/// Solve the QP  min 1/2 d'Bd + g'd  s.t.  c + J d >= 0  in three
/// variables by enumerating candidate active sets (at most three active
/// constraints at a non-degenerate solution). Returns the best feasible
/// step, or `None` when no enumerated active set yields one.
fn solve_qp(
    b: &Matrix3<f64>,
    grad: &Vector3<f64>,
    jac: &[Vector3<f64>],
    c: &[f64],
    candidates: &[usize],
) -> Option<Vector3<f64>> {
    let try_active = |active: &[usize]| -> Option<(Vector3<f64>, f64)> {
        let k = active.len();
        let mut kkt = DMatrix::<f64>::zeros(3 + k, 3 + k);
        let mut rhs = DVector::<f64>::zeros(3 + k);
        for i in 0..3 {
            for j in 0..3 {
                kkt[(i, j)] = b[(i, j)];
            }
            rhs[i] = -grad[i];
        }
        for (i, &ci) in active.iter().enumerate() {
            for j in 0..3 {
                kkt[(j, 3 + i)] = -jac[ci][j];
                kkt[(3 + i, j)] = jac[ci][j];
            }
            rhs[3 + i] = -c[ci];
        }
        let sol = kkt.lu().solve(&rhs)?;
        let d = Vector3::new(sol[0], sol[1], sol[2]);
        if (0..k).any(|i| sol[3 + i] < -1e-12) {
            return None;
        }
        if (0..c.len()).any(|i| c[i] + jac[i].dot(&d) < -1e-9) {
            return None;
        }
        Some((d, 0.5 * d.dot(&(b * d)) + grad.dot(&d)))
    };

    let mut best: Option<(Vector3<f64>, f64)> = None;
    let mut consider = |set: &[usize]| {
        if let Some((d, obj)) = try_active(set) {
            if best.as_ref().is_none_or(|(_, bo)| obj < *bo) {
                best = Some((d, obj));
            }
        }
    };
    consider(&[]);
    for i in 0..candidates.len() {
        consider(&[candidates[i]]);
        for j in i + 1..candidates.len() {
            consider(&[candidates[i], candidates[j]]);
            for k in j + 1..candidates.len() {
                consider(&[candidates[i], candidates[j], candidates[k]]);
            }
        }
    }
    best.map(|(d, _)| d)
}

/// One SQP solve from a fixed starting point. Tracks the best feasible
/// iterate encountered and returns it when one exists; otherwise returns
/// the final iterate with its violation level.
fn sqp_solve(
    training: &TrainingSet,
    spec: &ConstraintSpec,
    start: [f64; 3],
) -> Option<(Hyperparameters, f64, f64)> {
    let eval = |x: &[f64; 3]| -> Option<(f64, Vec<f64>)> {
        let t = theta_in_box(x)?;
        smooth_constraints(training, &t, spec)
    };
    let grad_nll = |x: &[f64; 3]| -> Option<Vector3<f64>> {
        let t = theta_in_box(x)?;
        gp::nll_gradient(training, &t).ok().map(Vector3::from)
    };

    let mut x = start;
    let (mut fx, mut cx) = eval(&x)?;
    let mut gx = grad_nll(&x)?;
    let n_con = cx.len();

    let mut best_feasible: Option<(f64, [f64; 3], f64)> = None;
    if violation_of(&cx) <= FEASIBILITY_TOL {
        best_feasible = Some((fx, x, violation_of(&cx)));
    }

    // Hessian model of the Lagrangian, kept positive definite by damping.
    let mut bmat = Matrix3::<f64>::identity();
    let mut mu = 10.0f64;

    for _ in 0..SQP_MAX_ITERS {
        // Constraint Jacobian by central differences, one column per
        // log-parameter.
        let mut jac: Vec<Vector3<f64>> = vec![Vector3::zeros(); n_con];
        let mut defined = true;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += FD_STEP;
            xm[k] -= FD_STEP;
            match (eval(&xp), eval(&xm)) {
                (Some((_, cp)), Some((_, cm))) => {
                    for i in 0..n_con {
                        jac[i][k] = (cp[i] - cm[i]) / (2.0 * FD_STEP);
                    }
                }
                _ => {
                    defined = false;
                    break;
                }
            }
        }
        if !defined {
            break;
        }

        let mut order: Vec<usize> = (0..n_con).collect();
        order.sort_by(|&a, &b| cx[a].total_cmp(&cx[b]));
        let candidates: Vec<usize> = order
            .into_iter()
            .filter(|&i| cx[i] < 1.0)
            .take(QP_CANDIDATE_CAP)
            .collect();

        let d = match solve_qp(&bmat, &gx, &jac, &cx, &candidates) {
            Some(d) => d,
            None => {
                // Inconsistent linearization: take a least-squares step
                // toward the violated constraints instead.
                let violated: Vec<usize> = (0..n_con).filter(|&i| cx[i] < 0.0).collect();
                if violated.is_empty() {
                    break;
                }
                let a = DMatrix::from_fn(violated.len(), 3, |r, k| jac[violated[r]][k]);
                let rhs = DVector::from_fn(violated.len(), |r, _| -cx[violated[r]]);
                let sol = a.svd(true, true).solve(&rhs, 1e-12).ok()?;
                let mut d = Vector3::new(sol[0], sol[1], sol[2]);
                let norm = d.norm();
                if norm > 1.0 {
                    d /= norm;
                }
                d
            }
        };

        let phi0 = fx + mu * violation_sum(&cx);
        let dphi = gx.dot(&d) - mu * violation_sum(&cx);
        let mut accepted = None;
        let mut t = 1.0f64;
        for _ in 0..40 {
            let xt = [x[0] + t * d[0], x[1] + t * d[1], x[2] + t * d[2]];
            if let Some((ft, ct)) = eval(&xt) {
                if ft + mu * violation_sum(&ct) <= phi0 + 1e-4 * t * dphi.min(0.0) + 1e-12 {
                    accepted = Some((xt, ft, ct));
                    break;
                }
            }
            t *= 0.5;
        }
        let (xn, fn_, cn) = match accepted {
            Some(v) => v,
            None => {
                // The merit function rejects the step; sharpen the
                // feasibility weight and retry.
                mu *= 10.0;
                if mu > 1e12 {
                    break;
                }
                continue;
            }
        };

        let gn = match grad_nll(&xn) {
            Some(g) => g,
            None => break,
        };
        let s = Vector3::new(xn[0] - x[0], xn[1] - x[1], xn[2] - x[2]);
        let mut yv = gn - gx;
        let sy = s.dot(&yv);
        let sbs = s.dot(&(bmat * s));
        // Powell damping keeps the update positive definite.
        if sy < 0.2 * sbs {
            let denom = sbs - sy;
            let w = if denom != 0.0 { 0.8 * sbs / denom } else { 1.0 };
            yv = yv * w + (bmat * s) * (1.0 - w);
        }
        let sy = s.dot(&yv);
        if sy > 1e-12 && sbs > 0.0 {
            let bs = bmat * s;
            bmat = bmat - (bs * bs.transpose()) / sbs + (yv * yv.transpose()) / sy;
        }

        let step_norm = s.norm();
        x = xn;
        fx = fn_;
        cx = cn;
        gx = gn;
        let v = violation_of(&cx);
        if v <= FEASIBILITY_TOL && best_feasible.as_ref().is_none_or(|(bf, _, _)| fx < *bf) {
            best_feasible = Some((fx, x, v));
        }
        if step_norm < SQP_STEP_TOL && v < 1e-9 {
            break;
        }
    }

    let (f_out, x_out, v_out) = match best_feasible {
        Some((f, xb, v)) => (f, xb, v),
        None => (fx, x, violation_of(&cx)),
    };
    let theta = Hyperparameters::from_array(x_out).ok()?;
    Some((theta, f_out, v_out))
}

/// Direct construction of a feasible point in the interpolation regime.
///
/// With sigma_n/sigma held tiny the posterior mean depends only on the
/// length scale, while the posterior standard deviation scales linearly
/// with sigma. Scanning the length scale for a mean that stays
/// nonnegative at every constraint point and then shrinking sigma until
/// cdf_factor times the standard deviation fits under the mean yields a
/// feasible point whenever one exists in this regime. The data-fit
/// constraints hold automatically because the mean interpolates the
/// observations. Among feasible candidates the lowest-NLL one is kept.
fn feasible_construction(
    training: &TrainingSet,
    spec: &ConstraintSpec,
) -> Option<(Hyperparameters, f64, f64)> {
    let pts = &spec.constraint_points;
    let mut span = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d2: f64 = pts[i]
                .coords()
                .iter()
                .zip(pts[j].coords())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            span = span.max(d2.sqrt());
        }
    }
    // Negated form rejects NaN as well.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(span > 0.0) {
        return None;
    }

    const N_SCAN: usize = 400;
    const LOG_RATIO: f64 = -15.0; // log(sigma_n / sigma) in the scan
    let lo = (span / 100.0).ln();
    let hi = (2.0 * span).ln();
    let mut best: Option<(f64, Hyperparameters, f64)> = None;

    for k in 0..N_SCAN {
        let ll = lo + (hi - lo) * k as f64 / (N_SCAN - 1) as f64;
        let probe = match Hyperparameters::from_array([ll, 0.0, LOG_RATIO]) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let gp = match gp::fit(training, &probe) {
            Ok(g) => g,
            Err(_) => continue,
        };
        // Largest sigma for which mean + cdf_factor * sigma * omega >= 0
        // everywhere; rescaling both sigma and sigma_n leaves the mean
        // unchanged and scales the standard deviation exactly.
        let mut margin = f64::INFINITY;
        let mut defined = true;
        for xc in pts {
            match gp::predict(&gp, xc) {
                Ok(p) => {
                    let omega = p.variance.max(0.0).sqrt();
                    margin = margin.min(p.mean / ((-spec.cdf_factor) * omega + 1e-300));
                }
                Err(_) => {
                    defined = false;
                    break;
                }
            }
        }
        if !defined {
            continue;
        }
        let ls = if margin > 0.0 {
            (0.5 * margin).ln()
        } else {
            -20.0
        };
        let ls = ls.clamp(-40.0, 10.0);
        let theta = match Hyperparameters::from_array([ll, ls, ls + LOG_RATIO]) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let Some((nll, c)) = smooth_constraints(training, &theta, spec) else {
            continue;
        };
        if !nll.is_finite() {
            continue;
        }
        let v = violation_of(&c);
        if v <= FEASIBILITY_TOL && best.as_ref().is_none_or(|(bn, _, _)| nll < *bn) {
            best = Some((nll, theta, v));
        }
    }

    best.map(|(nll, theta, v)| (theta, nll, v))
}

/// Minimize the NLL subject to the constraint system, restarting from a
/// Gaussian-perturbed initial guess while the solve ends infeasible.
///
/// The relaxed (unconstrained) problem is solved first; its optimum is
/// returned directly when it happens to be feasible. Otherwise the first
/// SQP attempt starts from `theta0`. If it ends infeasible, the
/// interpolation-regime construction is tried next (the feasible set is
/// often a thin sliver that descent methods struggle to enter from a cold
/// start); only then are Gaussian-perturbed restarts consumed.
pub fn minimize_constrained(
    training: &TrainingSet,
    spec: &ConstraintSpec,
    theta0: &Hyperparameters,
    policy: &RestartPolicy,
) -> Result<FitResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let base = theta0.as_array();
    let mut best: Option<(Hyperparameters, f64, f64)> = None;

    // Relaxation first: when the unconstrained optimum already satisfies
    // every constraint it is also the constrained optimum.
    if let Ok(relaxed) = minimize_unconstrained(training, theta0, Some(spec)) {
        if relaxed.feasible {
            return Ok(relaxed);
        }
    }

    for attempt in 0..=policy.max_restarts {
        let start = if attempt == 0 {
            base
        } else {
            let mut s = base;
            for v in &mut s {
                let noise: f64 = StandardNormal.sample(&mut rng);
                *v += noise;
            }
            s
        };

        if let Some((theta, nll, violation)) = sqp_solve(training, spec, start) {
            if violation <= FEASIBILITY_TOL {
                return Ok(FitResult {
                    theta,
                    nll,
                    feasible: true,
                    max_violation: violation,
                    restarts_used: attempt,
                });
            }
            if best.as_ref().is_none_or(|(_, _, v)| violation < *v) {
                best = Some((theta, nll, violation));
            }
        }

        if attempt == 0 {
            if let Some((theta, nll, violation)) = feasible_construction(training, spec) {
                if violation <= FEASIBILITY_TOL {
                    return Ok(FitResult {
                        theta,
                        nll,
                        feasible: true,
                        max_violation: violation,
                        restarts_used: 0,
                    });
                }
                if best.as_ref().is_none_or(|(_, _, v)| violation < *v) {
                    best = Some((theta, nll, violation));
                }
            }
        }
    }

    let (best_theta, best_nll, max_violation) = best.unwrap_or((*theta0, f64::INFINITY, f64::INFINITY));
    Err(Error::NoFeasibleSolution {
        restarts: policy.max_restarts,
        max_violation,
        best_theta,
        best_nll,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_points(xs: &[f64]) -> Vec<InputPoint> {
        xs.iter().map(|&x| InputPoint::scalar(x)).collect()
    }

    #[test]
    fn spec_validation() {
        assert!(ConstraintSpec::new(vec![], -2.0, 0.03).is_err());
        assert!(ConstraintSpec::new(scalar_points(&[0.0]), 2.0, 0.03).is_err());
        assert!(ConstraintSpec::new(scalar_points(&[0.0]), -2.0, 0.0).is_err());
        let s = ConstraintSpec::from_eta(scalar_points(&[0.0]), 0.022, 0.03).unwrap();
        assert!((s.cdf_factor + 2.014090812018139).abs() < 1e-9);
    }

    #[test]
    fn constraint_values_interpolation_case() {
        // sigma_n ~ 0, constraint points equal training points, all y >= 0:
        // first block equals the observations, data-fit block equals eps.
        let training = TrainingSet::new(
            scalar_points(&[0.0, 0.5, 1.0]),
            vec![1.0, 2.0, 1.5],
        )
        .unwrap();
        let theta = Hyperparameters::from_positive(0.4, 1.5, 0.0).unwrap();
        let spec = ConstraintSpec::with_defaults(scalar_points(&[0.0, 0.5, 1.0])).unwrap();
        let values = constraint_values(&training, &theta, &spec).unwrap();
        assert_eq!(values.len(), 6);
        for (v, y) in values[..3].iter().zip(&training.observations) {
            assert!((v - y).abs() < 1e-5, "{v} vs {y}");
        }
        for v in &values[3..] {
            assert!((v - spec.data_fit_eps).abs() < 1e-5);
        }
    }

    #[test]
    fn check_feasibility_reports_worst_entry() {
        // Construct a case where one nonnegativity entry is clearly negative:
        // data forces the mean below zero at a constraint point.
        let training = TrainingSet::new(scalar_points(&[0.0, 1.0]), vec![-1.0, -1.0]).unwrap();
        let theta = Hyperparameters::from_positive(0.5, 1.0, 0.01).unwrap();
        let spec = ConstraintSpec::new(scalar_points(&[0.5]), -2.0, 10.0).unwrap();
        let (feasible, violation) = check_feasibility(&training, &theta, &spec);
        assert!(!feasible);
        let values = constraint_values(&training, &theta, &spec).unwrap();
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((violation + min).abs() < 1e-12);
    }

    #[test]
    fn factorization_failure_is_infinite_violation() {
        let training = TrainingSet::new(scalar_points(&[0.3, 0.3]), vec![1.0, 1.0]).unwrap();
        let theta = Hyperparameters::from_positive(1.0, 1.0, 0.0).unwrap();
        let spec = ConstraintSpec::with_defaults(scalar_points(&[0.5])).unwrap();
        let (feasible, violation) = check_feasibility(&training, &theta, &spec);
        assert!(!feasible);
        assert!(violation.is_infinite());
    }

    #[test]
    fn unconstrained_beats_start() {
        let training = TrainingSet::new(
            scalar_points(&[0.0, 0.25, 0.5, 0.75, 1.0]),
            vec![1.0, 0.8, 0.9, 1.1, 1.0],
        )
        .unwrap();
        let theta0 = Hyperparameters::from_array(DEFAULT_THETA0).unwrap();
        let res = minimize_unconstrained(&training, &theta0, None).unwrap();
        let nll0 = gp::negative_log_likelihood(&training, &theta0).unwrap();
        assert!(res.nll <= nll0 + 1e-9);
        assert!(res.feasible);
    }

    #[test]
    fn inactive_constraints_match_unconstrained() {
        // Data well above zero: the nonnegativity constraints are slack at
        // the unconstrained optimum, so both solves should agree.
        let training = TrainingSet::new(
            scalar_points(&[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]),
            vec![2.1, 2.3, 2.2, 2.4, 2.2, 2.3],
        )
        .unwrap();
        let theta0 = Hyperparameters::from_array(DEFAULT_THETA0).unwrap();
        let uncon = minimize_unconstrained(&training, &theta0, None).unwrap();

        let grid: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
        let spec = ConstraintSpec::new(scalar_points(&grid), -2.0, 0.5).unwrap();
        let (feasible, _) = check_feasibility(&training, &uncon.theta, &spec);
        assert!(feasible, "unconstrained optimum should satisfy slack constraints");

        let con =
            minimize_constrained(&training, &spec, &theta0, &RestartPolicy::default()).unwrap();
        assert!(con.feasible);
        assert!(con.nll <= uncon.nll + 1e-3, "{} vs {}", con.nll, uncon.nll);
        assert!(con.nll >= uncon.nll - 1e-8);
    }

    #[test]
    fn impossible_data_fit_yields_no_feasible_solution() {
        // Two conflicting observations at the same location: the posterior
        // mean cannot be within eps of both.
        let training =
            TrainingSet::new(scalar_points(&[0.5, 0.5]), vec![1.0, -1.0]).unwrap();
        let spec = ConstraintSpec::new(scalar_points(&[0.5]), -2.0, 1e-3).unwrap();
        let theta0 = Hyperparameters::from_array(DEFAULT_THETA0).unwrap();
        let policy = RestartPolicy {
            max_restarts: 2,
            seed: 1,
        };
        match minimize_constrained(&training, &spec, &theta0, &policy) {
            Err(Error::NoFeasibleSolution { restarts, .. }) => assert_eq!(restarts, 2),
            other => panic!("expected NoFeasibleSolution, got {other:?}"),
        }
    }

    #[test]
    fn restart_perturbations_are_reproducible() {
        let training = TrainingSet::new(
            scalar_points(&[0.0, 0.3, 0.7, 1.0]),
            vec![0.5, 0.2, 0.3, 0.6],
        )
        .unwrap();
        let spec = ConstraintSpec::with_defaults(scalar_points(&[0.1, 0.5, 0.9])).unwrap();
        let theta0 = Hyperparameters::from_array(DEFAULT_THETA0).unwrap();
        let policy = RestartPolicy {
            max_restarts: 5,
            seed: 42,
        };
        let a = minimize_constrained(&training, &spec, &theta0, &policy).unwrap();
        let b = minimize_constrained(&training, &spec, &theta0, &policy).unwrap();
        assert_eq!(a.theta.as_array(), b.theta.as_array());
        assert_eq!(a.nll.to_bits(), b.nll.to_bits());
        assert_eq!(a.restarts_used, b.restarts_used);
    }
}
