//! Weibull proportional-hazards margins with baseline survival
//! `exp(-(lambda t)^k)`.

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weibull {
    pub lambda: f64,
    pub k: f64,
}

impl Weibull {
    pub fn new(lambda: f64, k: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(domain("Weibull lambda", lambda, "(0, inf)"));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(domain("Weibull k", k, "(0, inf)"));
        }
        Ok(Self { lambda, k })
    }

    /// Baseline hazard `k lambda^k t^(k-1)`.
    pub fn baseline_hazard(&self, t: f64) -> f64 {
        self.k * self.lambda.powf(self.k) * t.powf(self.k - 1.0)
    }

    /// Time at which the survival with linear predictor `lp` equals `s`.
    pub fn inverse_survival(&self, s: f64, lp: f64) -> f64 {
        (-s.ln()).powf(1.0 / self.k) / (self.lambda * (lp / self.k).exp())
    }
}

/// Survival, density and cumulative hazard of one margin at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginEval {
    pub survival: f64,
    pub density: f64,
    pub cum_hazard: f64,
}

/// `X'beta + M'gamma`.
pub fn linear_predictor(beta: &[f64], covariates: &[f64], gamma: &[f64], design_row: &[f64]) -> f64 {
    let xb: f64 = beta.iter().zip(covariates).map(|(b, x)| b * x).sum();
    let mg: f64 = gamma.iter().zip(design_row).map(|(g, m)| g * m).sum();
    xb + mg
}

pub fn margin_eval(margin: Weibull, linear_predictor: f64, t: f64) -> Result<MarginEval> {
    if !(t >= 0.0) {
        return Err(domain("event time", t, "[0, inf)"));
    }
    let rel = linear_predictor.exp();
    let cum_hazard = (margin.lambda * t).powf(margin.k) * rel;
    let survival = (-cum_hazard).exp();
    let density = margin.baseline_hazard(t) * rel * survival;
    Ok(MarginEval {
        survival,
        density,
        cum_hazard,
    })
}
