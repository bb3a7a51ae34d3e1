//! Experiment configuration, commands and CSV output for the `pathwise` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;
pub mod toy;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, CliResult};
