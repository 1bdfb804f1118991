//! Clayton, Gumbel-Hougaard and independence copulas.
//!
//! Likelihood-facing evaluations work in negative-log coordinates
//! `x = -ln u`, `y = -ln v`, which for survival copulas are exactly the
//! marginal cumulative hazards. The `*_nl` methods take those coordinates
//! and return logs; the plain methods validate `(u, v)` and exponentiate.

use crate::error::{domain, Error, Result};
use crate::model::CopulaKind;

/// A copula with its dependence parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaFamily {
    kind: CopulaKind,
    eta: f64,
}

const H_INVERSE_TOL: f64 = 1e-10;
const H_INVERSE_MAX_ITER: usize = 200;

/// `ln(e^a + e^b - 1)` for `a, b >= 0`.
fn ln_clayton_sum(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi < 30.0 {
        (a.exp_m1() + b.exp_m1()).ln_1p()
    } else {
        hi + ((lo - hi).exp() - (-hi).exp()).ln_1p()
    }
}

/// `ln(e^a - 1)` for `a > 0`.
fn ln_expm1(a: f64) -> f64 {
    if a > 30.0 {
        a + (-(-a).exp()).ln_1p()
    } else {
        a.exp_m1().ln()
    }
}

/// `ln(1 + e^z)`.
fn ln1p_exp(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `ln(e^a + e^b)`.
fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

impl CopulaFamily {
    pub fn independence() -> Self {
        Self {
            kind: CopulaKind::Independence,
            eta: f64::NAN,
        }
    }

    pub fn clayton(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(domain("Clayton eta", eta, "(0, inf)"));
        }
        Ok(Self {
            kind: CopulaKind::Clayton,
            eta,
        })
    }

    /// Gumbel-Hougaard copula; `eta == 1` is the independence copula.
    pub fn gumbel(eta: f64) -> Result<Self> {
        if eta == 1.0 {
            return Ok(Self::independence());
        }
        if !(eta > 1.0 && eta.is_finite()) {
            return Err(domain("Gumbel eta", eta, "[1, inf)"));
        }
        Ok(Self {
            kind: CopulaKind::Gumbel,
            eta,
        })
    }

    pub fn new(kind: CopulaKind, eta: Option<f64>) -> Result<Self> {
        match (kind, eta) {
            (CopulaKind::Independence, _) => Ok(Self::independence()),
            (CopulaKind::Clayton, Some(eta)) => Self::clayton(eta),
            (CopulaKind::Gumbel, Some(eta)) => Self::gumbel(eta),
            (_, None) => Err(Error::InvalidModel(format!("{kind:?} copula needs eta"))),
        }
    }

    /// From the unconstrained dependence coordinate (`ln eta` or `ln(eta - 1)`).
    pub fn from_dep(kind: CopulaKind, dep: Option<f64>) -> Self {
        match (kind, dep) {
            (CopulaKind::Independence, _) | (_, None) => Self::independence(),
            (k, Some(d)) => Self {
                kind: k,
                eta: k.dep_to_eta(d),
            },
        }
    }

    pub fn from_tau(kind: CopulaKind, tau: f64) -> Result<Self> {
        match kind {
            CopulaKind::Independence => Ok(Self::independence()),
            k => Self::new(k, Some(tau_to_eta(k, tau)?)),
        }
    }

    pub fn kind(&self) -> CopulaKind {
        self.kind
    }

    pub fn eta(&self) -> Option<f64> {
        self.kind.has_dependence().then_some(self.eta)
    }

    pub fn tau(&self) -> f64 {
        match self.kind {
            CopulaKind::Independence => 0.0,
            k => eta_to_tau(k, self.eta).unwrap_or(0.0),
        }
    }

    /// `ln C(e^-x, e^-y)`.
    pub fn log_cdf_nl(&self, x: f64, y: f64) -> f64 {
        let eta = self.eta;
        match self.kind {
            CopulaKind::Independence => -x - y,
            CopulaKind::Clayton => -ln_clayton_sum(eta * x, eta * y) / eta,
            CopulaKind::Gumbel => {
                let ln_s = logaddexp(eta * x.ln(), eta * y.ln());
                -(ln_s / eta).exp()
            }
        }
    }

    /// `ln ∂C/∂u` at `(e^-x, e^-y)`, written so that the leading terms cancel
    /// analytically when `∂C/∂u` is close to one.
    pub fn log_partial_u_nl(&self, x: f64, y: f64) -> f64 {
        if y == 0.0 {
            // C(u, 1) = u
            return 0.0;
        }
        let eta = self.eta;
        match self.kind {
            CopulaKind::Independence => -y,
            CopulaKind::Clayton => -(1.0 / eta + 1.0) * ln1p_exp(ln_expm1(eta * y) - eta * x),
            CopulaKind::Gumbel => {
                if x == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let l = ln1p_exp(eta * (y.ln() - x.ln()));
                let q = l / eta;
                let shrink = if q > 700.0 { x - (x.ln() + q).exp() } else { -x * q.exp_m1() };
                shrink + (1.0 / eta - 1.0) * l
            }
        }
    }

    /// `ln ∂C/∂v` at `(e^-x, e^-y)`.
    pub fn log_partial_v_nl(&self, x: f64, y: f64) -> f64 {
        self.log_partial_u_nl(y, x)
    }

    /// `ln c` at `(e^-x, e^-y)`.
    pub fn log_density_nl(&self, x: f64, y: f64) -> f64 {
        let eta = self.eta;
        match self.kind {
            CopulaKind::Independence => 0.0,
            CopulaKind::Clayton => {
                eta.ln_1p() + (eta + 1.0) * (x + y) - (1.0 / eta + 2.0) * ln_clayton_sum(eta * x, eta * y)
            }
            CopulaKind::Gumbel => {
                let (lx, ly) = (x.ln(), y.ln());
                let ln_s = logaddexp(eta * lx, eta * ly);
                let a = (ln_s / eta).exp();
                -a + x + y + (eta - 1.0) * (lx + ly) + (1.0 / eta - 2.0) * ln_s + (a + eta - 1.0).ln()
            }
        }
    }

    fn check_unit(u: f64, v: f64) -> Result<(f64, f64)> {
        for (name, z) in [("copula argument u", u), ("copula argument v", v)] {
            if !(z > 0.0 && z <= 1.0) {
                return Err(domain(name, z, "(0, 1]"));
            }
        }
        Ok((-u.ln(), -v.ln()))
    }

    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        let (x, y) = Self::check_unit(u, v)?;
        if self.kind == CopulaKind::Independence {
            return Ok(u * v);
        }
        Ok(self.log_cdf_nl(x, y).exp())
    }

    pub fn partial_u(&self, u: f64, v: f64) -> Result<f64> {
        let (x, y) = Self::check_unit(u, v)?;
        if self.kind == CopulaKind::Independence {
            return Ok(v);
        }
        Ok(self.log_partial_u_nl(x, y).exp())
    }

    /// `h(u, v) = P(U <= u | V = v)`.
    pub fn partial_v(&self, u: f64, v: f64) -> Result<f64> {
        let (x, y) = Self::check_unit(u, v)?;
        if self.kind == CopulaKind::Independence {
            return Ok(u);
        }
        Ok(self.log_partial_v_nl(x, y).exp())
    }

    pub fn log_density(&self, u: f64, v: f64) -> Result<f64> {
        let (x, y) = Self::check_unit(u, v)?;
        Ok(self.log_density_nl(x, y))
    }

    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        Ok(self.log_density(u, v)?.exp())
    }

    /// Solves `partial_v(u, v) = w` for `u`.
    pub fn h_inverse(&self, w: f64, v: f64) -> Result<f64> {
        if !(w > 0.0 && w < 1.0) {
            return Err(domain("h_inverse level w", w, "(0, 1)"));
        }
        if !(v > 0.0 && v < 1.0) {
            return Err(domain("h_inverse conditioning v", v, "(0, 1)"));
        }
        match self.kind {
            CopulaKind::Independence => Ok(w),
            CopulaKind::Clayton => {
                let eta = self.eta;
                let t = (-eta / (eta + 1.0) * w.ln()).exp_m1();
                let ln_scale = -eta * v.ln() + t.ln();
                let ln_inner = ln1p_exp(ln_scale);
                Ok((-ln_inner / eta).exp())
            }
            CopulaKind::Gumbel => self.h_inverse_numeric(w, v),
        }
    }

    /// Safeguarded Newton on `t = ln u`; `h` is increasing in `t` with
    /// derivative `c(u, v) u`.
    fn h_inverse_numeric(&self, w: f64, v: f64) -> Result<f64> {
        let y = -v.ln();
        let h = |t: f64| self.log_partial_v_nl(-t, y).exp();
        let (mut lo, mut hi) = (-1.0f64, 0.0f64);
        let mut iter = 0;
        while h(lo) > w {
            hi = lo;
            lo *= 2.0;
            iter += 1;
            if iter > 60 {
                return Err(Error::RootFind { iterations: iter });
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..H_INVERSE_MAX_ITER {
            let r = h(t) - w;
            if r == 0.0 {
                return Ok(t.exp());
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let slope = (self.log_density_nl(-t, y) + t).exp();
            let newton = t - r / slope;
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let settled = (next - t).abs() <= 1e-15 * (1.0 + t.abs()) || hi - lo <= 1e-15 * (1.0 + lo.abs());
            t = next;
            if settled {
                if (h(t) - w).abs() <= H_INVERSE_TOL {
                    return Ok(t.exp());
                }
                break;
            }
        }
        Err(Error::RootFind {
            iterations: H_INVERSE_MAX_ITER,
        })
    }
}

/// Copula parameter for a target Kendall's tau.
pub fn tau_to_eta(kind: CopulaKind, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(domain("Kendall's tau", tau, "(0, 1)"));
    }
    match kind {
        CopulaKind::Clayton => Ok(2.0 * tau / (1.0 - tau)),
        CopulaKind::Gumbel => Ok(1.0 / (1.0 - tau)),
        CopulaKind::Independence => Err(Error::InvalidModel(
            "the independence copula has no dependence parameter".into(),
        )),
    }
}

pub fn eta_to_tau(kind: CopulaKind, eta: f64) -> Result<f64> {
    match kind {
        CopulaKind::Clayton if eta > 0.0 => Ok(eta / (eta + 2.0)),
        CopulaKind::Clayton => Err(domain("Clayton eta", eta, "(0, inf)")),
        CopulaKind::Gumbel if eta >= 1.0 => Ok(1.0 - 1.0 / eta),
        CopulaKind::Gumbel => Err(domain("Gumbel eta", eta, "[1, inf)")),
        CopulaKind::Independence => Ok(0.0),
    }
}
