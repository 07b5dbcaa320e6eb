//! Equilibrium-probe signal-to-noise engine for N spins coupled to a bosonic
//! bath through a reaction-coordinate mode.
//!
//! Units: every routine works in angular-frequency units with `hbar = k_B = 1`.
//! Callers usually set `omega = 1` and express everything else relative to it.

mod error;

pub mod baseline;
pub mod dicke;
pub mod grwa;
pub mod operators;
pub mod quad;
pub mod rcmap;
pub mod roots;
pub mod thermal;

pub use error::{Error, Result};
pub use operators::ProbeParams;
pub use thermal::{DeltaConvention, SectorMode, SnrOptions, SnrPoint, ThermalObservables, VarianceMode};
