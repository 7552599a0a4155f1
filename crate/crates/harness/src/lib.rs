//! Monte Carlo harness for the lcshift location-shift estimators: config
//! parsing, seeded parallel replications, CSV output and SVG charts.

pub mod config;
pub mod error;
pub mod experiment;
pub mod input;
pub mod output;
pub mod plot;
pub mod rng;

pub use config::{EstimatorKind, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, run_with, ReplicationEstimator, RowKey};
