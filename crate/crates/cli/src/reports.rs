//! Tables behind the `dicke` and `map-spectral` subcommands.

use equiprobe_core::dicke::{self, DickeParams, Phase};
use equiprobe_core::rcmap::{verify_equivalence, EquivalenceMode, OhmicResidual};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One coupling of a Dicke phase diagram at fixed `epsilon` (omega = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub gbar_omega: f64,
    pub mu: f64,
    /// `T_c / omega`; empty when there is no transition.
    pub tc_omega: Option<f64>,
    /// Filled when a temperature was requested.
    pub phase: Option<String>,
    pub eta: Option<f64>,
    pub snr_per_n: Option<f64>,
    /// Mean-field ground energy per spin.
    pub ground_energy_per_n: f64,
    pub hp_minus_normal: Option<f64>,
    pub hp_plus_normal: f64,
    pub hp_minus_superradiant: Option<f64>,
    pub hp_plus_superradiant: Option<f64>,
}

pub fn phase_diagram(epsilon: f64, gbars: &[f64], beta_omega: Option<f64>) -> Result<Vec<PhaseRow>> {
    gbars
        .iter()
        .map(|&gbar| {
            let p = DickeParams::new(epsilon, 1.0, gbar, 1)?;
            let hp = dicke::hp_excitations(&p)?;
            let (phase, eta, snr_per_n) = match beta_omega {
                Some(beta) => {
                    let (ph, s) = dicke::dicke_snr_per_n(&p, beta)?;
                    let eta = match ph {
                        Phase::Normal => 1.0,
                        Phase::Superradiant => dicke::solve_eta(&p, beta)?,
                    };
                    (Some(ph.as_str().to_string()), Some(eta), Some(s))
                }
                None => (None, None, None),
            };
            let ground = match dicke::superradiant_ground_energy(&p) {
                Ok(e) => e,
                Err(_) => -0.5 * epsilon,
            };
            Ok(PhaseRow {
                gbar_omega: gbar,
                mu: p.mu(),
                tc_omega: dicke::critical_temperature(&p),
                phase,
                eta,
                snr_per_n,
                ground_energy_per_n: ground,
                hp_minus_normal: hp.normal.minus,
                hp_plus_normal: hp.normal.plus,
                hp_minus_superradiant: hp.superradiant.and_then(|s| s.minus),
                hp_plus_superradiant: hp.superradiant.map(|s| s.plus),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub omega_c: f64,
    pub frequency: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub omega_c: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub gamma: f64,
    pub g: f64,
    pub delta: f64,
    pub mode: EquivalenceMode,
    pub summary: Vec<SpectralSummary>,
    /// Whether the largest residual falls strictly as the cutoff grows.
    pub monotone: bool,
    pub rows: Vec<SpectralRow>,
}

/// Residual of the Ohmic/Lorentzian equivalence for each cutoff in
/// `cutoffs` (units of omega0 = 1).
pub fn spectral_report(
    gamma: f64,
    g: f64,
    cutoffs: &[f64],
    grid: &[f64],
    delta: f64,
    mode: EquivalenceMode,
) -> Result<SpectralReport> {
    if cutoffs.is_empty() {
        return Err(CliError::config("--omega-c", "need at least one cutoff"));
    }
    let mut summary = Vec::new();
    let mut rows = Vec::new();
    for &wc in cutoffs {
        let res = OhmicResidual::new(gamma, wc)?;
        let (max, points) = verify_equivalence(&res, 1.0, g, grid, delta, mode)?;
        summary.push(SpectralSummary { omega_c: wc, max_residual: max });
        rows.extend(points.into_iter().map(|p| SpectralRow { omega_c: wc, frequency: p.frequency, residual: p.residual }));
    }
    let monotone = summary.windows(2).all(|w| w[1].max_residual < w[0].max_residual);
    Ok(SpectralReport { gamma, g, delta, mode, summary, monotone, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_diagram_marks_transition() {
        let rows = phase_diagram(1.0, &[0.2, 0.6], Some(50.0)).unwrap();
        assert_eq!(rows[0].tc_omega, None);
        assert_eq!(rows[0].phase.as_deref(), Some("normal"));
        assert!(rows[0].hp_minus_normal.is_some());
        assert!(rows[1].tc_omega.is_some());
        assert_eq!(rows[1].phase.as_deref(), Some("superradiant"));
        assert!(rows[1].eta.unwrap() > 1.0);
        assert!(rows[1].hp_minus_normal.is_none());
        assert!(rows[1].ground_energy_per_n < -0.5);
    }

    #[test]
    fn spectral_report_shrinks_with_cutoff() {
        let grid: Vec<f64> = (0..8).map(|i| 0.1 + 0.4 * i as f64).collect();
        let r = spectral_report(0.05, 0.5, &[1e2, 1e3], &grid, 1e-6, EquivalenceMode::Counterterm).unwrap();
        assert_eq!(r.rows.len(), 16);
        assert!(r.monotone);
        assert!(r.summary[1].max_residual < r.summary[0].max_residual);
    }
}
