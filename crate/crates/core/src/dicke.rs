//! Large-N thermodynamics of the Dicke model
//! `H = eps Jz + omega a^dag a + (2 gbar / sqrt N) Jx (a + a^dag)`.
//!
//! The mode is integrated out with coherent states and the remaining integral
//! over `z = Re(alpha) / sqrt(N)` is evaluated by Laplace's method on
//!
//! ```text
//! Phi(z) = -beta omega z^2 + ln 2 cosh( beta sqrt(eps^2 + 16 gbar^2 z^2) / 2 )
//! ```
//!
//! With `mu = eps omega / (4 gbar^2)`, a superradiant phase exists below
//! `T_c = eps / (2 artanh mu)` whenever `mu < 1`. There the maximiser of Phi
//! moves off zero and is fixed by `eta mu = tanh(beta eta eps / 2)`.

use serde::{Deserialize, Serialize};

use crate::baseline;
use crate::error::{Error, Result};
use crate::roots;
use crate::thermal::{DeltaConvention, SnrPoint, ThermalObservables};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DickeParams {
    pub epsilon: f64,
    pub omega: f64,
    /// Intensive coupling `gbar = sqrt(N) g / 2`.
    pub gbar: f64,
    pub n_spins: u32,
}

impl DickeParams {
    pub fn new(epsilon: f64, omega: f64, gbar: f64, n_spins: u32) -> Result<Self> {
        let p = Self { epsilon, omega, gbar, n_spins };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.omega > 0.0 && self.gbar > 0.0) || self.n_spins == 0 {
            return Err(Error::domain(format!(
                "Dicke parameters must be positive (eps={}, omega={}, gbar={}, N={})",
                self.epsilon, self.omega, self.gbar, self.n_spins
            )));
        }
        if !(self.epsilon.is_finite() && self.omega.is_finite() && self.gbar.is_finite()) {
            return Err(Error::domain("Dicke parameters must be finite"));
        }
        Ok(())
    }

    /// `eps omega / (4 gbar^2)`.
    pub fn mu(&self) -> f64 {
        self.epsilon * self.omega / (4.0 * self.gbar * self.gbar)
    }

    /// Per-spin coupling `g = 2 gbar / sqrt(N)`.
    pub fn per_spin_coupling(&self) -> f64 {
        2.0 * self.gbar / (self.n_spins as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Normal,
    Superradiant,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Normal => "normal",
            Phase::Superradiant => "superradiant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DickeSolution {
    pub phase: Phase,
    pub tc: Option<f64>,
    /// 1 in the normal phase.
    pub eta: f64,
    pub z0: f64,
    pub ln_z: f64,
    pub snr_per_n: f64,
}

/// `eps / (2 artanh mu)` when `mu < 1`, otherwise no transition.
pub fn critical_temperature(p: &DickeParams) -> Option<f64> {
    let mu = p.mu();
    if mu < 1.0 {
        Some(p.epsilon / (2.0 * mu.atanh()))
    } else {
        None
    }
}

/// Phase at inverse temperature `beta`; `T = T_c` counts as normal.
pub fn phase_at(p: &DickeParams, beta: f64) -> Phase {
    match critical_temperature(p) {
        Some(tc) if 1.0 / beta < tc => Phase::Superradiant,
        _ => Phase::Normal,
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

/// Root of `eta mu = tanh(beta eta eps / 2)` in `[1, 1/mu]`.
pub fn solve_eta(p: &DickeParams, beta: f64) -> Result<f64> {
    p.validate()?;
    check_beta(beta)?;
    let mu = p.mu();
    let tc = critical_temperature(p).ok_or_else(|| Error::Phase(format!("mu = {mu} >= 1: no superradiant phase")))?;
    let t = 1.0 / beta;
    if t > tc {
        return Err(Error::Phase(format!("T = {t} is above T_c = {tc}")));
    }
    let f = |eta: f64| eta * mu - (0.5 * beta * eta * p.epsilon).tanh();
    if f(1.0) >= 0.0 {
        return Ok(1.0);
    }
    let hi = 1.0 / mu;
    if f(hi) <= 0.0 {
        return Ok(hi);
    }
    let root = roots::brent(f, 1.0, hi, 1e-15, 0.0)?;
    if root.residual.abs() >= 1e-12 {
        return Err(Error::RootNotConverged { iterations: root.iterations, residual: root.residual });
    }
    Ok(root.x)
}

/// `ln(2 cosh y)` without overflow.
fn ln_2cosh(y: f64) -> f64 {
    let a = y.abs();
    a + (-2.0 * a).exp().ln_1p()
}

pub fn phi(p: &DickeParams, beta: f64, z: f64) -> f64 {
    let e = (p.epsilon * p.epsilon + 16.0 * p.gbar * p.gbar * z * z).sqrt();
    -beta * p.omega * z * z + ln_2cosh(0.5 * beta * e)
}

pub fn phi_second_derivative(p: &DickeParams, beta: f64, z: f64) -> f64 {
    let g2 = p.gbar * p.gbar;
    let e = (p.epsilon * p.epsilon + 16.0 * g2 * z * z).sqrt();
    let u = 0.5 * beta * e;
    let du = 8.0 * beta * g2 * z / e;
    let d2u = 8.0 * beta * g2 * p.epsilon * p.epsilon / (e * e * e);
    let t = u.tanh();
    -2.0 * beta * p.omega + (1.0 - t * t) * du * du + t * d2u
}

/// Order parameter and maximiser of Phi.
fn saddle(p: &DickeParams, beta: f64) -> Result<(Phase, f64, f64)> {
    match phase_at(p, beta) {
        Phase::Normal => Ok((Phase::Normal, 1.0, 0.0)),
        Phase::Superradiant => {
            let eta = solve_eta(p, beta)?;
            Ok((Phase::Superradiant, eta, p.epsilon * (eta * eta - 1.0).max(0.0).sqrt() / (4.0 * p.gbar)))
        }
    }
}

/// `ln Z ~= N Phi(z0) + (1/2) ln(2 / (beta omega |Phi''(z0)|))`.
pub fn laplace_partition(p: &DickeParams, beta: f64) -> Result<(f64, f64)> {
    p.validate()?;
    check_beta(beta)?;
    let (_, _, z0) = saddle(p, beta)?;
    let curvature = phi_second_derivative(p, beta, z0).abs();
    if curvature < 1e-14 {
        return Err(Error::FlatSaddle(curvature));
    }
    let ln_z = p.n_spins as f64 * phi(p, beta, z0) + 0.5 * (2.0 / (beta * p.omega * curvature)).ln();
    Ok((ln_z, z0))
}

/// Effective `tanh` entering `<Jz>` and `<Jz^2>`: `tanh(beta eps / 2)` in
/// the normal phase and `tanh(beta eps eta / 2) / eta` in the superradiant one.
fn effective_polarisation(p: &DickeParams, beta: f64) -> Result<(Phase, f64, f64)> {
    let (phase, eta, _) = saddle(p, beta)?;
    let t = (0.5 * beta * p.epsilon * eta).tanh() / eta;
    Ok((phase, eta, t))
}

pub fn dicke_observables(p: &DickeParams, beta: f64) -> Result<ThermalObservables> {
    p.validate()?;
    check_beta(beta)?;
    let n = p.n_spins as f64;
    let (_, _, t) = effective_polarisation(p, beta)?;
    let (ln_z, _) = laplace_partition(p, beta).unwrap_or((f64::NAN, 0.0));
    let mean_jz = -0.5 * n * t;
    let mean_jz2 = 0.25 * n + 0.25 * n * (n - 1.0) * t * t;
    Ok(ThermalObservables { beta, ln_z, mean_jz, mean_jz2, var_jz: 0.25 * n * (1.0 - t * t) })
}

/// Per-spin SNR: the weak-coupling value in the normal phase,
/// `omega^2 / (16 gbar^4 - eps^2 omega^2)` in the superradiant phase.
pub fn dicke_snr_per_n(p: &DickeParams, beta: f64) -> Result<(Phase, f64)> {
    p.validate()?;
    check_beta(beta)?;
    match phase_at(p, beta) {
        Phase::Normal => Ok((Phase::Normal, baseline::weak_snr_per_spin(p.epsilon, beta))),
        Phase::Superradiant => {
            let denom = 16.0 * p.gbar.powi(4) - (p.epsilon * p.omega).powi(2);
            if !(denom > 0.0) {
                return Err(Error::domain(format!("16 gbar^4 - eps^2 omega^2 = {denom:e} is not positive")));
            }
            Ok((Phase::Superradiant, p.omega * p.omega / denom))
        }
    }
}

/// Extensive SNR with the per-spin `delta_snr` convention.
pub fn dicke_snr(p: &DickeParams, beta: f64) -> Result<(SnrPoint, DickeSolution)> {
    let (phase, per_n) = dicke_snr_per_n(p, beta)?;
    let n = p.n_spins as f64;
    let (_, eta, z0) = saddle(p, beta)?;
    let ln_z = laplace_partition(p, beta).map(|(l, _)| l).unwrap_or(f64::NAN);
    let snr = n * per_n;
    let snr_weak = baseline::weak_snr(p.n_spins, p.epsilon, beta).snr;
    let point = SnrPoint {
        beta,
        snr,
        snr_weak,
        delta_snr: DeltaConvention::PerSpin.apply(snr, snr_weak, p.n_spins),
        convention: DeltaConvention::PerSpin,
    };
    Ok((point, DickeSolution { phase, tc: critical_temperature(p), eta, z0, ln_z, snr_per_n: per_n }))
}

/// Two Holstein–Primakoff excitation energies; `minus` is `None` where its
/// square is negative (the expansion point is unstable).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationPair {
    pub minus: Option<f64>,
    pub plus: f64,
    /// `(eps_-)^2`, reported even when negative.
    pub minus_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpSpectrum {
    pub normal: ExcitationPair,
    /// Present only when `mu < 1`.
    pub superradiant: Option<ExcitationPair>,
}

fn pair(a: f64, b: f64, cross: f64) -> ExcitationPair {
    // (e_pm)^2 = [a^2 + b^2 pm sqrt((a^2 - b^2)^2 + cross)] / 2
    let s = a * a + b * b;
    let d = ((a * a - b * b).powi(2) + cross).sqrt();
    let minus_squared = 0.5 * (s - d);
    ExcitationPair {
        minus: if minus_squared >= 0.0 { Some(minus_squared.sqrt()) } else { None },
        plus: (0.5 * (s + d)).sqrt(),
        minus_squared,
    }
}

pub fn hp_excitations(p: &DickeParams) -> Result<HpSpectrum> {
    hp_excitations_raw(p.epsilon, p.omega, p.gbar)
}

/// As [`hp_excitations`] but allowing `gbar = 0`.
pub fn hp_excitations_raw(epsilon: f64, omega: f64, gbar: f64) -> Result<HpSpectrum> {
    if !(epsilon > 0.0 && omega > 0.0 && gbar >= 0.0) {
        return Err(Error::domain("HP spectrum needs eps, omega > 0 and gbar >= 0"));
    }
    let normal = pair(epsilon, omega, 16.0 * gbar * gbar * epsilon * omega);
    let superradiant = if gbar > 0.0 {
        let mu = epsilon * omega / (4.0 * gbar * gbar);
        (mu < 1.0).then(|| pair(epsilon / mu, omega, 4.0 * epsilon * epsilon * omega * omega))
    } else {
        None
    };
    Ok(HpSpectrum { normal, superradiant })
}

/// Mean-field ground energy in the superradiant phase,
/// `-(N eps / 4)(mu + 1/mu)`.
pub fn superradiant_ground_energy(p: &DickeParams) -> Result<f64> {
    let mu = p.mu();
    if mu >= 1.0 {
        return Err(Error::Phase(format!("mu = {mu} >= 1: ground state is normal")));
    }
    Ok(-0.25 * p.n_spins as f64 * p.epsilon * (mu + 1.0 / mu))
}
