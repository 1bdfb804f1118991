//! Generalized score test and likelihood-ratio test of `gamma = 0`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::basis::spd_inverse;
use crate::error::{Error, Result};
use crate::inference::chisq::chisq_sf;
use crate::inference::fit::{fit_mle, fit_unrestricted_from, require_converged, SINGULAR_RCOND};
use crate::inference::loglik::SurvivalData;
use crate::inference::optim::OptimizerConfig;
use crate::model::{FitResult, Layout, ModelSpec, TestKind, TestResult};

/// Tolerated negative LRT statistic, attributed to optimizer noise.
pub const LRT_NEGATIVE_TOL: f64 = 1e-6;

/// Moore-Penrose inverse over eigenvalues above `rcond * max|eig|`.
fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.amax();
    let inv = eig
        .eigenvalues
        .map(|v| if max > 0.0 && v > SINGULAR_RCOND * max { 1.0 / v } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// `U₁' (J₁₁ - J₁₂ J₂₂⁻¹ J₂₁)⁻¹ U₁` at a restricted fit.
pub fn score_test_from_fit(null: &FitResult, layout: &Layout) -> Result<TestResult> {
    let p = layout.len();
    if null.score.len() != p || null.observed_info.nrows() != p {
        return Err(Error::Dimension(
            "score test needs score and information over the full parameter vector".into(),
        ));
    }
    let gamma: Vec<usize> = layout.gamma().collect();
    let rest: Vec<usize> = layout.nuisance().collect();
    let info = &null.observed_info;
    let j11 = info.select_rows(&gamma).select_columns(&gamma);
    let j12 = info.select_rows(&gamma).select_columns(&rest);
    let j22 = info.select_rows(&rest).select_columns(&rest);
    let u1 = DVector::from_iterator(gamma.len(), gamma.iter().map(|&j| null.score[j]));

    let (j22_inv, mut singular) = match spd_inverse(&j22, SINGULAR_RCOND) {
        Some(inv) => (inv, false),
        None => (pseudo_inverse(&j22), true),
    };
    let schur = &j11 - &j12 * &j22_inv * j12.transpose();
    let schur = (&schur + schur.transpose()) * 0.5;
    let schur_inv = match spd_inverse(&schur, SINGULAR_RCOND) {
        Some(inv) => inv,
        None => {
            singular = true;
            pseudo_inverse(&schur)
        }
    };
    let statistic = if u1.iter().all(|v| *v == 0.0) {
        0.0
    } else {
        u1.dot(&(&schur_inv * &u1)).max(0.0)
    };
    let df = layout.n_gamma;
    Ok(TestResult {
        statistic,
        df,
        p_value: chisq_sf(statistic, df)?,
        kind: TestKind::Score,
        singular,
    })
}

/// Fits the null model and returns the score test; the null fit is returned
/// alongside so callers can reuse it.
pub fn score_test_with_fit(
    spec: &ModelSpec,
    data: &SurvivalData,
    config: &OptimizerConfig,
) -> Result<(TestResult, FitResult)> {
    let null_spec = spec.restricted();
    let null = require_converged(fit_mle(&null_spec, data, config, None)?)?;
    let test = score_test_from_fit(&null, &null_spec.layout(data.n_covariates()))?;
    Ok((test, null))
}

pub fn score_test(spec: &ModelSpec, data: &SurvivalData, config: &OptimizerConfig) -> Result<TestResult> {
    score_test_with_fit(spec, data, config).map(|(t, _)| t)
}

/// `-2 (loglik_null - loglik_full)` against chi-square with `df` degrees of freedom.
pub fn lrt_from_fits(null: &FitResult, full: &FitResult, df: usize) -> Result<TestResult> {
    for fit in [null, full] {
        if !fit.converged {
            return Err(Error::NotConverged {
                iterations: fit.n_iter,
                gradient_norm: fit.gradient_norm,
            });
        }
    }
    let q = -2.0 * (null.loglik - full.loglik);
    if q < -LRT_NEGATIVE_TOL {
        return Err(Error::OptimizationInconsistency(q));
    }
    let statistic = q.max(0.0);
    Ok(TestResult {
        statistic,
        df,
        p_value: chisq_sf(statistic, df)?,
        kind: TestKind::Lrt,
        singular: full.singular_info,
    })
}

pub fn lrt(spec: &ModelSpec, data: &SurvivalData, config: &OptimizerConfig) -> Result<TestResult> {
    let null = require_converged(fit_mle(&spec.restricted(), data, config, None)?)?;
    let full = fit_unrestricted_from(&null, spec, data, config)?;
    lrt_from_fits(&null, &full, spec.n_gamma())
}
