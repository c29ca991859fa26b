//! Evaluation, audit and CLI plumbing around `shiftrec-core`.

pub mod audit;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod input;
pub mod metrics;

pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, DataSource, ExperimentConfig, ExperimentReport};
