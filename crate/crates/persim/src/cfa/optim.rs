//! Quasi-Newton minimization used by the factor-analysis fitter.
//!
//! BFGS with backtracking line search on an objective that may be undefined
//! at some points (the fitter returns `None` when a candidate parameter
//! vector implies a non-positive-definite covariance). Infeasible points are
//! treated as infinitely bad, so the line search shrinks back into the
//! feasible region.

use nalgebra::{DMatrix, DVector};

/// Stopping configuration for [`minimize`].
#[derive(Debug, Clone, Copy)]
pub struct StopRules {
    pub max_iterations: usize,
    /// Relative change in objective value below which iteration stops.
    pub f_rel_tol: f64,
    /// Infinity-norm of the gradient below which iteration stops.
    pub grad_tol: f64,
}

/// Result of a minimization run. `converged` is false when the iteration cap
/// or a stalled line search ended the run while the gradient was still large.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;
const CURVATURE_FLOOR: f64 = 1e-12;

/// Minimizes `objective` starting from `x0`.
///
/// `objective` returns the value and gradient at a point, or `None` where
/// the objective is undefined. The start point must be feasible; if it is
/// not, the start is returned unconverged.
pub fn minimize<F>(objective: F, x0: DVector<f64>, rules: &StopRules) -> MinimizeResult
where
    F: Fn(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
{
    let dim = x0.len();
    let mut x = x0;
    let (mut f, mut grad) = match objective(&x) {
        Some(fg) => fg,
        None => {
            return MinimizeResult {
                grad_inf_norm: f64::INFINITY,
                x,
                f: f64::INFINITY,
                iterations: 0,
                converged: false,
            }
        }
    };
    let mut h_inv = DMatrix::identity(dim, dim);
    let mut first_update_pending = true;

    for iteration in 0..rules.max_iterations {
        let grad_norm = grad.amax();
        if grad_norm < rules.grad_tol {
            return MinimizeResult {
                x,
                f,
                grad_inf_norm: grad_norm,
                iterations: iteration,
                converged: true,
            };
        }

        let mut direction = -(&h_inv * &grad);
        let mut slope = direction.dot(&grad);
        if slope >= 0.0 {
            // The curvature approximation lost descent quality; restart it.
            h_inv = DMatrix::identity(dim, dim);
            first_update_pending = true;
            direction = -grad.clone();
            slope = direction.dot(&grad);
        }

        let mut step = 1.0;
        let mut accepted = None;
        while step >= MIN_STEP {
            let candidate = &x + &direction * step;
            if let Some((fc, gc)) = objective(&candidate) {
                if fc <= f + ARMIJO_C1 * step * slope {
                    accepted = Some((candidate, fc, gc));
                    break;
                }
            }
            step *= 0.5;
        }

        let (x_next, f_next, grad_next) = match accepted {
            Some(t) => t,
            None => {
                // No acceptable step in this direction; report the best
                // point found with convergence judged by the gradient.
                return MinimizeResult {
                    converged: grad_norm < rules.grad_tol,
                    x,
                    f,
                    grad_inf_norm: grad_norm,
                    iterations: iteration,
                };
            }
        };

        let s = &x_next - &x;
        let y = &grad_next - &grad;
        let sy = s.dot(&y);
        if sy > CURVATURE_FLOOR * s.norm() * y.norm() {
            if first_update_pending {
                // Scale the initial inverse Hessian to the problem before
                // the first curvature update.
                let yy = y.dot(&y);
                if yy > 0.0 {
                    h_inv = DMatrix::identity(dim, dim) * (sy / yy);
                }
                first_update_pending = false;
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // BFGS inverse update: H += (1 + yHy/sy) ssT/sy - (H y sT + s yT H)/sy.
            let ss = &s * s.transpose();
            let hy_s = &hy * s.transpose();
            h_inv += ss * (rho * (1.0 + rho * yhy)) - (&hy_s + hy_s.transpose()) * rho;
        }

        let f_change = (f - f_next).abs();
        let done = f_change < rules.f_rel_tol * (1.0 + f.abs());
        x = x_next;
        f = f_next;
        grad = grad_next;
        if done {
            return MinimizeResult {
                grad_inf_norm: grad.amax(),
                x,
                f,
                iterations: iteration + 1,
                converged: true,
            };
        }
    }

    let grad_norm = grad.amax();
    MinimizeResult {
        converged: grad_norm < rules.grad_tol,
        x,
        f,
        grad_inf_norm: grad_norm,
        iterations: rules.max_iterations,
    }
}
