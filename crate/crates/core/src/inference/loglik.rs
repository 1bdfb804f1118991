//! Joint censored log-likelihood of the copula model with Weibull FLM margins.

use crate::basis::DesignMatrix;
use crate::copula::CopulaFamily;
use crate::error::{Error, Result};
use crate::model::{Layout, Margins, ModelSpec, ParameterVector, SubjectRecord};

/// Column-oriented copy of the records and design, ready for repeated
/// likelihood evaluation.
#[derive(Debug, Clone)]
pub struct SurvivalData {
    ids: Vec<String>,
    y: [Vec<f64>; 2],
    ln_y: [Vec<f64>; 2],
    event: [Vec<bool>; 2],
    covariates: Vec<f64>,
    design: Vec<f64>,
    n_covariates: usize,
    n_gamma: usize,
}

impl SurvivalData {
    pub fn new(records: &[SubjectRecord], design: &DesignMatrix) -> Result<Self> {
        if design.n_rows() != records.len() {
            return Err(Error::Dimension(format!(
                "design has {} rows for {} records",
                design.n_rows(),
                records.len()
            )));
        }
        let p = records.first().map_or(0, |r| r.covariates.len());
        let n_gamma = design.n_cols();
        let mut data = Self {
            ids: Vec::with_capacity(records.len()),
            y: [Vec::new(), Vec::new()],
            ln_y: [Vec::new(), Vec::new()],
            event: [Vec::new(), Vec::new()],
            covariates: Vec::with_capacity(records.len() * p),
            design: Vec::with_capacity(records.len() * n_gamma),
            n_covariates: p,
            n_gamma,
        };
        for (i, r) in records.iter().enumerate() {
            r.validate()?;
            if r.covariates.len() != p {
                return Err(Error::InvalidRecord {
                    id: r.id.clone(),
                    reason: format!("expected {p} covariates, found {}", r.covariates.len()),
                });
            }
            data.ids.push(r.id.clone());
            for (k, (y, d)) in [(r.y1, r.d1), (r.y2, r.d2)].into_iter().enumerate() {
                data.y[k].push(y);
                data.ln_y[k].push(y.ln());
                data.event[k].push(d);
            }
            data.covariates.extend_from_slice(&r.covariates);
            data.design.extend(design.rows.row(i).iter());
        }
        if let Some(v) = data.design.iter().find(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!("non-finite design entry {v}")));
        }
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn n_gamma(&self) -> usize {
        self.n_gamma
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn times(&self, margin: usize) -> &[f64] {
        &self.y[margin]
    }

    pub fn events(&self, margin: usize) -> &[bool] {
        &self.event[margin]
    }

    pub fn n_events(&self, margin: usize) -> usize {
        self.event[margin].iter().filter(|&&d| d).count()
    }

    pub fn covariate_row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.n_covariates..(i + 1) * self.n_covariates]
    }

    pub fn design_row(&self, i: usize) -> &[f64] {
        &self.design[i * self.n_gamma..(i + 1) * self.n_gamma]
    }

    /// The same subjects with margins 1 and 2 exchanged.
    pub fn swap_margins(&self) -> Self {
        let mut out = self.clone();
        out.y.swap(0, 1);
        out.ln_y.swap(0, 1);
        out.event.swap(0, 1);
        out
    }
}

/// The log-likelihood as a function of the flat unconstrained vector.
#[derive(Debug, Clone, Copy)]
pub struct LogLikelihood<'a> {
    pub spec: ModelSpec,
    pub layout: Layout,
    pub data: &'a SurvivalData,
}

struct MarginTerm {
    cum_hazard: f64,
    log_density: f64,
}

impl<'a> LogLikelihood<'a> {
    pub fn new(spec: &ModelSpec, data: &'a SurvivalData) -> Result<Self> {
        spec.validate()?;
        if spec.n_gamma() != data.n_gamma() {
            return Err(Error::Dimension(format!(
                "model has {} effect coefficients, design has {} columns",
                spec.n_gamma(),
                data.n_gamma()
            )));
        }
        Ok(Self {
            spec: *spec,
            layout: spec.layout(data.n_covariates()),
            data,
        })
    }

    #[inline]
    fn margin_term(&self, theta: &[f64], margin: usize, i: usize, lp: f64) -> MarginTerm {
        let log_lambda = theta[self.layout.log_lambda(margin)];
        let log_k = theta[self.layout.log_k(margin)];
        let ln_y = self.data.ln_y[margin][i];
        let ln_cum = log_k.exp() * (log_lambda + ln_y) + lp;
        let cum_hazard = ln_cum.exp();
        let log_density = if self.data.event[margin][i] {
            log_k + ln_cum - ln_y - cum_hazard
        } else {
            0.0
        };
        MarginTerm {
            cum_hazard,
            log_density,
        }
    }

    #[inline]
    fn contribution(&self, theta: &[f64], copula: &CopulaFamily, i: usize) -> f64 {
        let lay = &self.layout;
        let lp = crate::inference::margin::linear_predictor(
            &theta[lay.beta()],
            self.data.covariate_row(i),
            &theta[lay.gamma()],
            self.data.design_row(i),
        );
        let m1 = self.margin_term(theta, 0, i, lp);
        if self.spec.margins == Margins::FirstOnly {
            return if self.data.event[0][i] { m1.log_density } else { -m1.cum_hazard };
        }
        let m2 = self.margin_term(theta, 1, i, lp);
        let (x, y) = (m1.cum_hazard, m2.cum_hazard);
        match (self.data.event[0][i], self.data.event[1][i]) {
            (true, true) => copula.log_density_nl(x, y) + m1.log_density + m2.log_density,
            (true, false) => copula.log_partial_u_nl(x, y) + m1.log_density,
            (false, true) => copula.log_partial_v_nl(x, y) + m2.log_density,
            (false, false) => copula.log_cdf_nl(x, y),
        }
    }

    fn copula(&self, theta: &[f64]) -> CopulaFamily {
        CopulaFamily::from_dep(self.spec.copula, self.layout.dep().map(|j| theta[j]))
    }

    /// Log-likelihood at a flat parameter vector; non-finite when any
    /// subject's contribution is.
    pub fn value(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.layout.len());
        let copula = self.copula(theta);
        let mut total = 0.0;
        for i in 0..self.data.n() {
            total += self.contribution(theta, &copula, i);
        }
        total
    }

    pub fn value_checked(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.layout.len() {
            return Err(Error::Dimension(format!(
                "{} parameters for a layout of {}",
                theta.len(),
                self.layout.len()
            )));
        }
        let v = self.value(theta);
        if v.is_finite() {
            return Ok(v);
        }
        let copula = self.copula(theta);
        let bad = (0..self.data.n())
            .find(|&i| !self.contribution(theta, &copula, i).is_finite())
            .map_or_else(|| "<sum>".to_string(), |i| self.data.id(i).to_string());
        Err(Error::Evaluation { subject: bad })
    }
}

/// Joint log-likelihood of the data at `params`.
pub fn loglik(spec: &ModelSpec, params: &ParameterVector, data: &SurvivalData) -> Result<f64> {
    let ll = LogLikelihood::new(spec, data)?;
    let theta = params.to_flat(&ll.layout)?;
    ll.value_checked(&theta)
}
