//! Conversion from laboratory units (ordinary frequencies in GHz, temperature
//! in mK) to the dimensionless `omega = 1` units used by the engine.

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Boltzmann constant in J/K (exact in the 2019 SI).
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Planck constant in J s (exact in the 2019 SI).
pub const PLANCK: f64 = 6.62607015e-34;

/// `k_B / h` in GHz per kelvin.
pub fn kb_over_h_ghz_per_kelvin() -> f64 {
    BOLTZMANN / PLANCK * 1e-9
}

/// `k_B T / h` in GHz.
pub fn thermal_frequency_ghz(temperature_mk: f64) -> f64 {
    kb_over_h_ghz_per_kelvin() * temperature_mk * 1e-3
}

/// Angular frequency `2 pi nu` in rad/ns.
pub fn angular(nu_ghz: f64) -> f64 {
    std::f64::consts::TAU * nu_ghz
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalPoint {
    pub epsilon_ghz: f64,
    pub omega_ghz: f64,
    pub g_ghz: f64,
    pub temperature_mk: f64,
}

/// Everything in units of the mode frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dimensionless {
    pub epsilon: f64,
    pub g: f64,
    pub beta_omega: f64,
    pub beta_epsilon: f64,
    /// `omega` in rad/ns, the scale that was divided out.
    pub omega_angular: f64,
}

pub fn convert_units(p: &PhysicalPoint) -> Result<Dimensionless> {
    let fields = [
        ("epsilon_ghz", p.epsilon_ghz),
        ("omega_ghz", p.omega_ghz),
        ("g_ghz", p.g_ghz),
        ("temperature_mk", p.temperature_mk),
    ];
    for (name, v) in fields {
        let ok = if name == "g_ghz" { v >= 0.0 } else { v > 0.0 };
        if !(ok && v.is_finite()) {
            return Err(CliError::config(name, format!("must be positive and finite, got {v}")));
        }
    }
    let thermal = thermal_frequency_ghz(p.temperature_mk);
    Ok(Dimensionless {
        epsilon: p.epsilon_ghz / p.omega_ghz,
        g: p.g_ghz / p.omega_ghz,
        beta_omega: p.omega_ghz / thermal,
        beta_epsilon: p.epsilon_ghz / thermal,
        omega_angular: angular(p.omega_ghz),
    })
}
