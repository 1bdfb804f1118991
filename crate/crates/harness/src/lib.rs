//! Data ingestion, configuration and experiment orchestration for copula FLM
//! gene-based tests.

pub mod commands;
pub mod config;
pub mod io;
pub mod report;

pub use commands::{run_power, run_simulate, run_test, run_test_on, run_type1};
pub use config::{Overrides, RunConfig};
pub use report::RunReport;
