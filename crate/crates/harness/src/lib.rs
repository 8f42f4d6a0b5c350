//! Experiment harness: configuration, benchmark runs with resumable
//! content-hashed cells, staged tuning grids and reporting.

pub mod config;
pub mod fetch;
pub mod report;
pub mod run;
pub mod summary;
pub mod tune;

pub use config::{ConfigError, DatasetSpec, ExperimentConfig, Method};
pub use summary::{read_summaries, RunSummary};
