//! Maximum-likelihood fits of the copula FLM, restricted (`gamma = 0`) or
//! unrestricted.

use nalgebra::DMatrix;

use crate::basis::spd_inverse;
use crate::copula::tau_to_eta;
use crate::error::{Error, Result};
use crate::inference::loglik::{LogLikelihood, SurvivalData};
use crate::inference::numdiff::{numeric_gradient, numeric_hessian};
use crate::inference::optim::{maximize, OptimizerConfig};
use crate::model::{CopulaKind, FitResult, Layout, LogWeibull, ModelSpec, ParameterVector};
use crate::stats::kendall_tau;

/// Reciprocal-condition threshold below which an information block is singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// Exponential-rate start for each margin with `k = 1`, `beta = gamma = 0`.
fn crude_start(spec: &ModelSpec, data: &SurvivalData) -> ParameterVector {
    let margins = (0..spec.n_margins())
        .map(|k| {
            let exposure: f64 = data.times(k).iter().sum::<f64>().max(1e-12);
            let events = (data.n_events(k) as f64).max(0.5);
            LogWeibull {
                log_lambda: (events / exposure).ln(),
                log_k: 0.0,
            }
        })
        .collect();
    ParameterVector {
        margins,
        beta: vec![0.0; data.n_covariates()],
        gamma: vec![0.0; spec.n_gamma()],
        dep: None,
    }
}

/// Kendall's tau of the pairs with both events observed, clamped into a
/// range every family accepts.
fn empirical_tau(data: &SurvivalData) -> f64 {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for i in 0..data.n() {
        if data.events(0)[i] && data.events(1)[i] {
            a.push(data.times(0)[i]);
            b.push(data.times(1)[i]);
        }
    }
    let tau = if a.len() >= 3 { kendall_tau(&a, &b) } else { f64::NAN };
    if tau.is_finite() {
        tau.clamp(0.01, 0.9)
    } else {
        0.01
    }
}

/// Starting values: an independence fit of the margins with `gamma = 0`,
/// then the copula parameter from the empirical Kendall's tau.
pub fn default_init(spec: &ModelSpec, data: &SurvivalData, config: &OptimizerConfig) -> Result<ParameterVector> {
    let mut start = crude_start(spec, data);
    if !spec.copula.has_dependence() || start.margins.len() == 1 {
        return Ok(start);
    }
    let ind = spec.with_copula(CopulaKind::Independence).restricted();
    if let Ok(fit) = fit_with(&ind, data, config, Some(&start), None, false) {
        if fit.loglik.is_finite() {
            start = fit.params;
        }
    }
    let eta = tau_to_eta(spec.copula, empirical_tau(data))?;
    start.dep = Some(spec.copula.eta_to_dep(eta)?);
    start.gamma = vec![0.0; spec.n_gamma()];
    Ok(start)
}

pub fn fit_mle(
    spec: &ModelSpec,
    data: &SurvivalData,
    config: &OptimizerConfig,
    init: Option<&ParameterVector>,
) -> Result<FitResult> {
    fit_with(spec, data, config, init, None, true)
}

/// Unrestricted fit warm-started at a restricted optimum, reusing its
/// observed information as the initial curvature.
pub fn fit_unrestricted_from(
    null: &FitResult,
    spec: &ModelSpec,
    data: &SurvivalData,
    config: &OptimizerConfig,
) -> Result<FitResult> {
    fit_with(
        &spec.unrestricted(),
        data,
        config,
        Some(&null.params),
        Some(&null.observed_info),
        true,
    )
}

fn free_indices(spec: &ModelSpec, layout: &Layout) -> Vec<usize> {
    if spec.restrict_gamma_to_zero {
        layout.nuisance().collect()
    } else {
        (0..layout.len()).collect()
    }
}

pub(crate) fn fit_with(
    spec: &ModelSpec,
    data: &SurvivalData,
    config: &OptimizerConfig,
    init: Option<&ParameterVector>,
    full_curvature: Option<&DMatrix<f64>>,
    with_information: bool,
) -> Result<FitResult> {
    let ll = LogLikelihood::new(spec, data)?;
    let layout = ll.layout;
    let start = match init {
        Some(p) => {
            let mut p = p.clone();
            if !layout.has_dep {
                p.dep = None;
            }
            p
        }
        None => default_init(spec, data, config)?,
    };
    let mut base = start.to_flat(&layout)?;
    let free = free_indices(spec, &layout);
    if spec.restrict_gamma_to_zero {
        for j in layout.gamma() {
            base[j] = 0.0;
        }
    }

    let expand = |z: &[f64]| {
        let mut full = base.clone();
        for (&j, &v) in free.iter().zip(z) {
            full[j] = v;
        }
        full
    };
    let objective = |z: &[f64]| ll.value(&expand(z));
    let z0: Vec<f64> = free.iter().map(|&j| base[j]).collect();
    ll.value_checked(&base)?;

    let curvature = full_curvature.map(|c| c.select_rows(&free).select_columns(&free));
    let opt = maximize(&objective, z0, curvature.as_ref(), config)?;
    let theta = expand(&opt.x);

    let (score, observed_info, singular_info) = if with_information {
        let full = |t: &[f64]| ll.value(t);
        let score = numeric_gradient(&full, &theta, config.richardson_base_step)?;
        let info = -numeric_hessian(&full, &theta, config.hessian_base_step)?;
        let free_info = info.select_rows(&free).select_columns(&free);
        let singular = spd_inverse(&free_info, SINGULAR_RCOND).is_none();
        (score, info, singular)
    } else {
        let mut score = vec![0.0; layout.len()];
        for (&j, &g) in free.iter().zip(&opt.gradient) {
            score[j] = g;
        }
        (score, DMatrix::zeros(0, 0), false)
    };

    Ok(FitResult {
        params: ParameterVector::from_flat(&layout, &theta)?,
        loglik: opt.value,
        score,
        observed_info,
        converged: opt.converged,
        n_iter: opt.n_iter,
        gradient_norm: opt.gradient_norm,
        singular_info,
    })
}

/// Fails with [`Error::NotConverged`] unless the fit converged.
pub fn require_converged(fit: FitResult) -> Result<FitResult> {
    if fit.converged {
        Ok(fit)
    } else {
        Err(Error::NotConverged {
            iterations: fit.n_iter,
            gradient_norm: fit.gradient_norm,
        })
    }
}
