//! Small dense BFGS minimizer over the three log-hyperparameters.
//!
//! Objective and gradient callbacks return `None` for points where the
//! covariance cannot be factorized; the line search treats those as
//! rejected trial points rather than fatal errors.

type Vec3 = [f64; 3];

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Cap on the Euclidean length of a single line-search step. Keeps the
    /// iterates out of degenerate far-field regions of the log-parameter
    /// space where the objective flattens.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-5,
            max_iters: 300,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec3,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn inf_norm(a: &Vec3) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Minimize a smooth (possibly partially defined) function of three
/// variables. Returns `None` only when the starting point itself cannot be
/// evaluated.
pub fn bfgs<F, G>(x0: Vec3, mut f: F, mut g: G, opts: &BfgsOptions) -> Option<BfgsResult>
where
    F: FnMut(&Vec3) -> Option<f64>,
    G: FnMut(&Vec3) -> Option<Vec3>,
{
    let mut x = x0;
    let mut fx = f(&x)?;
    let mut gx = g(&x)?;

    // Inverse Hessian approximation, row-major 3x3.
    let mut h = [[0.0f64; 3]; 3];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let mut converged = inf_norm(&gx) <= opts.grad_tol;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iters {
        iterations += 1;

        // Search direction d = -H g.
        let mut d = [0.0f64; 3];
        for i in 0..3 {
            d[i] = -(h[i][0] * gx[0] + h[i][1] * gx[1] + h[i][2] * gx[2]);
        }
        let mut slope = dot(&d, &gx);
        if slope >= 0.0 {
            // Lost positive definiteness; reset to steepest descent.
            d = [-gx[0], -gx[1], -gx[2]];
            for (i, row) in h.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        let d_norm = dot(&d, &d).sqrt();
        if d_norm > opts.max_step {
            let scale = opts.max_step / d_norm;
            for v in &mut d {
                *v *= scale;
            }
        }
        slope = dot(&d, &gx);

        // Backtracking Armijo line search; infeasible trials shrink the step.
        const C1: f64 = 1e-4;
        let mut t = 1.0f64;
        let mut accepted = None;
        for _ in 0..50 {
            let xt = [x[0] + t * d[0], x[1] + t * d[1], x[2] + t * d[2]];
            if let Some(ft) = f(&xt) {
                if ft <= fx + C1 * t * slope {
                    accepted = Some((xt, ft));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break; // no acceptable step along d
        };
        let Some(g_new) = g(&x_new) else {
            break;
        };

        let s = [x_new[0] - x[0], x_new[1] - x[1], x_new[2] - x[2]];
        let yv = [g_new[0] - gx[0], g_new[1] - gx[1], g_new[2] - gx[2]];
        let sy = dot(&s, &yv);
        if sy > 1e-12 {
            // BFGS inverse update: H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let rho = 1.0 / sy;
            let mut hy = [0.0f64; 3];
            for i in 0..3 {
                hy[i] = h[i][0] * yv[0] + h[i][1] * yv[1] + h[i][2] * yv[2];
            }
            let yhy = dot(&yv, &hy);
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + rho * rho * yhy * s[i] * s[j]
                        + rho * s[i] * s[j];
                }
            }
        }

        x = x_new;
        fx = f_new;
        gx = g_new;
        converged = inf_norm(&gx) <= opts.grad_tol;
    }

    Some(BfgsResult {
        x,
        value: fx,
        grad_inf_norm: inf_norm(&gx),
        iterations,
        converged,
    })
}
