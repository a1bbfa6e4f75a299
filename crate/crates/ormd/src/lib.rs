//! File formats and command runners around [`ormd_core`].
//!
//! Scenarios are TOML files ([`config`]); results are written as CSV and JSON
//! ([`artifacts`]). The `ormd` binary is a thin clap layer over [`run`].

pub mod artifacts;
pub mod config;
mod error;
pub mod run;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
