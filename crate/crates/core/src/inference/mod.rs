//! Likelihood, maximum-likelihood fitting and hypothesis tests for the
//! copula FLM.

pub mod chisq;
pub mod fit;
pub mod hypothesis;
pub mod loglik;
pub mod margin;
pub mod numdiff;
pub mod optim;

pub use chisq::chisq_sf;
pub use fit::{default_init, fit_mle, fit_unrestricted_from, require_converged, SINGULAR_RCOND};
pub use hypothesis::{lrt, lrt_from_fits, score_test, score_test_from_fit, score_test_with_fit};
pub use loglik::{loglik, LogLikelihood, SurvivalData};
pub use margin::{linear_predictor, margin_eval, MarginEval, Weibull};
pub use numdiff::{numeric_gradient, numeric_hessian};
pub use optim::{maximize, OptimizerConfig, Optimum};
