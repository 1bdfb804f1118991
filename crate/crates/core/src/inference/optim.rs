//! BFGS maximizer with Armijo backtracking, driven by Richardson
//! finite-difference gradients.

use nalgebra::{DMatrix, DVector};

use crate::basis::spd_inverse;
use crate::error::{Error, Result};
use crate::inference::numdiff::{central_hessian, numeric_gradient};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    /// Converged when `max |grad| <= grad_tol * (1 + |loglik|)`.
    pub grad_tol: f64,
    /// Stop when a step moves no coordinate by more than `step_tol * (1 + max |x|)`.
    pub step_tol: f64,
    /// Finite-difference step for gradients on the unconstrained scale.
    pub richardson_base_step: f64,
    /// Finite-difference step for observed-information Hessians.
    pub hessian_base_step: f64,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
    /// Step shrink factor per backtrack.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Largest move of any coordinate in one step.
    pub max_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            step_tol: 1e-12,
            richardson_base_step: 1e-4,
            hessian_base_step: 1e-3,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            max_step: 5.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.grad_tol,
            self.step_tol,
            self.richardson_base_step,
            self.hessian_base_step,
            self.armijo,
            self.backtrack,
            self.max_step,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.backtrack >= 1.0 || self.max_iter == 0 {
            return Err(Error::InvalidModel(format!("invalid optimizer config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub n_iter: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Inverse of `-H` if `-H` is positive definite.
fn inverse_curvature(neg_hessian: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    spd_inverse(neg_hessian, 1e-14)
}

/// Maximizes `f` from `x0`. `curvature`, when given, approximates `-∇²f(x0)`
/// and seeds the inverse-Hessian estimate; otherwise a central-difference
/// Hessian at `x0` is used.
pub fn maximize<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: Vec<f64>,
    curvature: Option<&DMatrix<f64>>,
    cfg: &OptimizerConfig,
) -> Result<Optimum> {
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let grad = |x: &[f64]| numeric_gradient(f, x, cfg.richardson_base_step);
    let mut g = grad(&x)?;

    let seeded = match curvature {
        Some(c) => inverse_curvature(c),
        None => central_hessian(f, &x, cfg.hessian_base_step)
            .ok()
            .and_then(|h| inverse_curvature(&(-h))),
    };
    let fallback = |gnorm: f64| DMatrix::<f64>::identity(n, n) * (1.0 / gnorm.max(1.0));
    let mut hinv = seeded.unwrap_or_else(|| fallback(max_abs(&g)));
    let mut just_reset = false;

    let mut n_iter = 0;
    let mut converged = false;
    while n_iter < cfg.max_iter {
        let gnorm = max_abs(&g);
        if gnorm <= cfg.grad_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        n_iter += 1;
        let gv = DVector::from_column_slice(&g);
        let mut dir = &hinv * &gv;
        let mut slope = gv.dot(&dir);
        if !(slope > 0.0) {
            hinv = fallback(gnorm);
            dir = &hinv * &gv;
            slope = gv.dot(&dir);
        }
        let longest = dir.amax();
        if longest > cfg.max_step {
            dir *= cfg.max_step / longest;
            slope *= cfg.max_step / longest;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(xi, di)| xi + alpha * di).collect();
            let ft = f(&trial);
            if ft.is_finite() && ft >= fx + cfg.armijo * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= cfg.backtrack;
        }
        let Some((x_new, f_new)) = accepted else {
            if just_reset {
                break;
            }
            hinv = fallback(gnorm);
            just_reset = true;
            continue;
        };
        just_reset = false;

        let g_new = match grad(&x_new) {
            Ok(g) => g,
            Err(_) => {
                // stencil left the finite region; keep the point, stop moving
                x = x_new;
                fx = f_new;
                break;
            }
        };
        let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, g.iter().zip(&g_new).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (H y s' + s y' H) + (rho^2 y'Hy + rho) s s'
            hinv -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }

        let small_step = s.amax() <= cfg.step_tol * (1.0 + max_abs(&x));
        let small_gain = (f_new - fx).abs() <= 1e-15 * (1.0 + fx.abs());
        x = x_new;
        fx = f_new;
        g = g_new;
        if small_step && small_gain {
            break;
        }
    }
    let gradient_norm = max_abs(&g);
    converged = converged || gradient_norm <= cfg.grad_tol * (1.0 + fx.abs());
    Ok(Optimum {
        x,
        value: fx,
        gradient: g,
        n_iter,
        converged,
        gradient_norm,
    })
}
