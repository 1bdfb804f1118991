//! Finite-difference gradients and Hessians with one Richardson
//! extrapolation step (central differences at `h` and `h/2`).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn steps(x: &[f64], base_step: f64) -> Vec<f64> {
    x.iter().map(|xi| base_step * xi.abs().max(1.0)).collect()
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &mut [f64], moves: &[(usize, f64)]) -> Result<f64> {
    for &(i, d) in moves {
        x[i] += d;
    }
    let v = f(x);
    for &(i, d) in moves {
        x[i] -= d;
    }
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteObjective)
    }
}

/// Gradient of `f` at `x`; step for coordinate `j` is `base_step * max(1, |x_j|)`.
pub fn numeric_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], base_step: f64) -> Result<Vec<f64>> {
    let h = steps(x, base_step);
    let mut work = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for (i, &hi) in h.iter().enumerate() {
        let d = |s: f64, w: &mut [f64]| -> Result<f64> {
            Ok((eval(f, w, &[(i, s)])? - eval(f, w, &[(i, -s)])?) / (2.0 * s))
        };
        let coarse = d(hi, &mut work)?;
        let fine = d(0.5 * hi, &mut work)?;
        grad.push((4.0 * fine - coarse) / 3.0);
    }
    Ok(grad)
}

/// Hessian of `f` at `x`, Richardson-extrapolated and symmetrized.
pub fn numeric_hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], base_step: f64) -> Result<DMatrix<f64>> {
    hessian_impl(f, x, base_step, true)
}

/// Plain central-difference Hessian at a single step size.
pub(crate) fn central_hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], base_step: f64) -> Result<DMatrix<f64>> {
    hessian_impl(f, x, base_step, false)
}

fn hessian_impl<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], base_step: f64, richardson: bool) -> Result<DMatrix<f64>> {
    let n = x.len();
    let h = steps(x, base_step);
    let mut work = x.to_vec();
    let f0 = eval(f, &mut work, &[])?;
    let mut hess = DMatrix::zeros(n, n);
    let scales: &[f64] = if richardson { &[1.0, 0.5] } else { &[1.0] };
    for i in 0..n {
        for j in 0..=i {
            let mut est = [0.0; 2];
            for (slot, &scale) in scales.iter().enumerate() {
                let (hi, hj) = (h[i] * scale, h[j] * scale);
                est[slot] = if i == j {
                    (eval(f, &mut work, &[(i, hi)])? - 2.0 * f0 + eval(f, &mut work, &[(i, -hi)])?) / (hi * hi)
                } else {
                    (eval(f, &mut work, &[(i, hi), (j, hj)])? - eval(f, &mut work, &[(i, hi), (j, -hj)])?
                        - eval(f, &mut work, &[(i, -hi), (j, hj)])?
                        + eval(f, &mut work, &[(i, -hi), (j, -hj)])?)
                        / (4.0 * hi * hj)
                };
            }
            let v = if richardson { (4.0 * est[1] - est[0]) / 3.0 } else { est[0] };
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_exact() {
        let f = |x: &[f64]| x[0] * x[0];
        let g = numeric_gradient(&f, &[3.0], 1e-4).unwrap();
        assert_relative_eq!(g[0], 6.0, epsilon = 1e-8);
        let h = numeric_hessian(&f, &[3.0], 1e-3).unwrap();
        assert_relative_eq!(h[(0, 0)], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn symmetric_point_has_zero_gradient() {
        let f = |x: &[f64]| (x[0] * x[0] + x[1] * x[1]).cos() + x[0].powi(4) * x[1].powi(2);
        let g = numeric_gradient(&f, &[0.0, 0.0], 1e-4).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn smooth_function_accuracy() {
        let f = |x: &[f64]| (x[0] * x[1]).exp() + x[1].sin() * x[2] * x[2];
        let x = [0.3, -0.7, 1.4];
        let g = numeric_gradient(&f, &x, 1e-3).unwrap();
        let e = (x[0] * x[1]).exp();
        let exact_g = [x[1] * e, x[0] * e + x[1].cos() * x[2] * x[2], 2.0 * x[1].sin() * x[2]];
        for (a, b) in g.iter().zip(exact_g) {
            assert_relative_eq!(*a, b, epsilon = 1e-9);
        }
        let h = numeric_hessian(&f, &x, 1e-3).unwrap();
        let exact_h = [
            [x[1] * x[1] * e, e + x[0] * x[1] * e, 0.0],
            [e + x[0] * x[1] * e, x[0] * x[0] * e - x[1].sin() * x[2] * x[2], 2.0 * x[1].cos() * x[2]],
            [0.0, 2.0 * x[1].cos() * x[2], 2.0 * x[1].sin()],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(h[(i, j)], exact_h[i][j], epsilon = 1e-7);
            }
        }
        assert_eq!(h, h.transpose());
    }

    #[test]
    fn non_finite_stencil_is_an_error() {
        let f = |x: &[f64]| x[0].ln();
        assert_eq!(numeric_gradient(&f, &[1e-6], 1e-4), Err(Error::NonFiniteObjective));
        assert!(numeric_hessian(&f, &[1e-6], 1e-4).is_err());
    }
}
