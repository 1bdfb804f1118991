//! Gene-based association testing for bivariate right-censored survival
//! traits: Archimedean copulas over Weibull proportional-hazards margins with
//! a functional linear model of the genetic effect.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod copula;
pub mod error;
pub mod inference;
pub mod model;
pub mod simgen;
pub mod stats;

pub use basis::{build_design, eval_basis, BasisMatrix, DesignMatrix};
pub use copula::{eta_to_tau, tau_to_eta, CopulaFamily};
pub use error::{Error, Result};
pub use model::*;
