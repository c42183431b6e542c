//! Workflows behind the `rydgate` binary: calibration, gate phases, Bell-state
//! analysis, sensitivity scans, dynamics and eye diagrams.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::RunConfig;
pub use error::{CliError, Result};
