//! Sweep harness around `equiprobe-core`: TOML configs, parallel grid
//! evaluation, CSV/JSON tables and power-law fits.

pub mod config;
pub mod error;
pub mod figures;
pub mod fit;
pub mod output;
pub mod reports;
pub mod sweep;
pub mod units;

pub use error::{CliError, Result};
