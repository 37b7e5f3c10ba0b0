//! Experiment harness around `pcl-core`: dataset and model file formats,
//! multi-seed benchmark runner, CSV/SVG reporting, and the `pcl` binary.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fmt;
pub mod plot;
pub mod runner;
pub mod schema;
pub mod summary;

pub use error::{CliError, CliResult};
