//! Experiment harness for `gibbs-bvs`: TOML-configured runs with
//! reproducible artifacts, and the acceptance suites.

pub mod config;
pub mod criteria;
pub mod error;
pub mod experiment;
pub mod suite;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use experiment::{run_experiment, RunReport, RunSummary};
pub use suite::{run_suite, SuiteReport, SUITES};
