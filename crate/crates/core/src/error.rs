use thiserror::Error;

/// Errors raised by the core model, basis, copula, inference and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate region: need at least 2 variants, got {0}")]
    DegenerateRegion(usize),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid record {id}: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("invalid model specification: {0}")]
    InvalidModel(String),

    #[error("{what} = {value} is outside its domain ({domain})")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("genotype smoother is singular: {0}")]
    SmootherSingular(String),

    #[error("subject {0} has missing genotypes, which require the smooth-both design")]
    MissingGenotype(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite likelihood contribution for subject {subject}")]
    Evaluation { subject: String },

    #[error("objective is not finite at a finite-difference stencil point")]
    NonFiniteObjective,

    #[error("root finding did not converge after {iterations} iterations")]
    RootFind { iterations: usize },

    #[error("model fit did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("likelihood ratio statistic {0:e} is negative: restricted fit beat the unrestricted fit")]
    OptimizationInconsistency(f64),

    #[error("invalid simulation config: {0}")]
    Config(String),

    #[error("censoring calibration failed: {0}")]
    Calibration(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Error {
    Error::Domain {
        what,
        value,
        domain,
    }
}
