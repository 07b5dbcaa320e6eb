//! Spectral densities and the single reaction-coordinate mapping between an
//! Ohmic residual bath and a Lorentzian original bath.
//!
//! The Cauchy transform of an odd-extended density is
//!
//! ```text
//! W(z) = (2/pi) int_0^inf J(w) w / (w^2 - z^2) dw
//!      = (1/pi) [ int_0^inf J/(w + z) dw + int_0^inf J/(w - z) dw ]
//! ```
//!
//! and the boundary value `Im W(w + i0) = J(w)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};

/// `J(w) = gamma w e^{-w / omega_c}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhmicResidual {
    pub gamma: f64,
    pub omega_c: f64,
}

impl OhmicResidual {
    pub fn new(gamma: f64, omega_c: f64) -> Result<Self> {
        if !(gamma > 0.0 && omega_c > 0.0) {
            return Err(Error::domain(format!("Ohmic density needs gamma, omega_c > 0 (got {gamma}, {omega_c})")));
        }
        Ok(Self { gamma, omega_c })
    }

    pub fn eval(&self, w: f64) -> f64 {
        self.gamma * w * (-w / self.omega_c).exp()
    }
}

/// `J(w) = Gamma varsigma w / ((w^2 - omega0^2)^2 + Gamma^2 w^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianOriginal {
    pub varsigma: f64,
    pub gamma_width: f64,
    pub omega0: f64,
}

impl LorentzianOriginal {
    pub fn eval(&self, w: f64) -> f64 {
        let d = w * w - self.omega0 * self.omega0;
        self.gamma_width * self.varsigma * w / (d * d + self.gamma_width * self.gamma_width * w * w)
    }

    /// Closed-form Cauchy transform, valid for `Im z > 0`.
    pub fn cauchy_closed_form(&self, z: Complex64) -> Complex64 {
        -self.varsigma / (z * z - self.omega0 * self.omega0 + Complex64::i() * self.gamma_width * z)
    }

    pub fn scale(&self) -> f64 {
        self.omega0.max(self.gamma_width)
    }

    /// Coupling `g` encoded by `varsigma = 4 omega0 g^2`.
    pub fn coupling(&self) -> f64 {
        (self.varsigma / (4.0 * self.omega0)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralDensity {
    Ohmic(OhmicResidual),
    Lorentzian(LorentzianOriginal),
}

impl SpectralDensity {
    pub fn eval(&self, w: f64) -> f64 {
        match self {
            SpectralDensity::Ohmic(o) => o.eval(w),
            SpectralDensity::Lorentzian(l) => l.eval(w),
        }
    }

    /// Characteristic frequency used to place the quadrature range.
    pub fn scale(&self) -> f64 {
        match self {
            SpectralDensity::Ohmic(o) => o.omega_c,
            SpectralDensity::Lorentzian(l) => l.scale(),
        }
    }
}

pub fn map_residual_to_original(res: &OhmicResidual, omega0: f64, g: f64) -> Result<LorentzianOriginal> {
    if !(omega0 > 0.0 && g > 0.0) {
        return Err(Error::domain(format!("mapping needs omega0, g > 0 (got {omega0}, {g})")));
    }
    Ok(LorentzianOriginal { varsigma: 4.0 * omega0 * g * g, gamma_width: res.gamma * omega0, omega0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauchyMode {
    /// `z` off the real axis.
    Analytic,
    /// Real `z`: the boundary value from above, `PV + i J(Re z)`.
    PrincipalValue,
}

/// Numerical Cauchy transform of `j` at `z`.
///
/// `scale` is a characteristic frequency of `j`; the finite range is
/// `[0, 50 * max(scale, |z|)]` and the remainder is mapped to `(0, 1]`.
/// Near the real axis the pole is removed by subtracting `J(Re z)` on a
/// window around it and adding the analytic logarithm back.
pub fn cauchy_transform<F>(j: F, scale: f64, z: Complex64, mode: CauchyMode, tol: f64) -> Result<Complex64>
where
    F: Fn(f64) -> f64,
{
    let z = match mode {
        CauchyMode::Analytic => {
            if z.im == 0.0 {
                return Err(Error::domain("analytic mode needs Im z != 0; use the principal-value mode"));
            }
            z
        }
        CauchyMode::PrincipalValue => Complex64::new(z.re, 0.0),
    };
    // W(-z) = W(z): fold onto Re z >= 0. On the real axis the fold swaps the
    // side of approach, undone by conjugating at the end.
    let flip_side = mode == CauchyMode::PrincipalValue && z.re < 0.0;
    let z = if z.re < 0.0 { -z } else { z };
    let (x, y) = (z.re, z.im);
    let opts = QuadOptions { epsabs: 1e-15, epsrel: tol, max_intervals: 20_000 };
    let top = 50.0 * scale.max(x);
    let jc = |w: f64| Complex64::new(j(w), 0.0);

    let plus = integrate(|w| jc(w) / (w + z), 0.0, top, opts)?.value
        + integrate_to_infinity(|w| jc(w) / (w + z), top, opts)?.value;

    let tail_minus = integrate_to_infinity(|w| jc(w) / (w - z), top, opts)?.value;
    let near_axis = x > 0.0 && y.abs() < 0.5 * x;
    let minus = if near_axis {
        let a = 0.5 * x.min(scale);
        let jx = j(x);
        let regular = |w: f64| (jc(w) - jx) / (w - z);
        let logs = if y == 0.0 {
            // boundary value from above
            Complex64::new(0.0, PI)
        } else {
            (Complex64::new(x + a, 0.0) - z).ln() - (Complex64::new(x - a, 0.0) - z).ln()
        };
        integrate(|w| jc(w) / (w - z), 0.0, x - a, opts)?.value
            + integrate(regular, x - a, x, opts)?.value
            + integrate(regular, x, x + a, opts)?.value
            + logs * jx
            + integrate(|w| jc(w) / (w - z), x + a, top, opts)?.value
    } else if x > 0.0 {
        integrate(|w| jc(w) / (w - z), 0.0, x, opts)?.value + integrate(|w| jc(w) / (w - z), x, top, opts)?.value
    } else {
        integrate(|w| jc(w) / (w - z), 0.0, top, opts)?.value
    };
    let w = (plus + minus + tail_minus) / PI;
    Ok(if flip_side { w.conj() } else { w })
}

/// How the residual-bath transform enters the equivalence check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivalenceMode {
    /// `W1(z) - W1(0)`: the static shift is cancelled by the mapped
    /// Hamiltonian's counterterm.
    #[default]
    Counterterm,
    /// `W1(z)` as is.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalencePoint {
    pub frequency: f64,
    pub residual: f64,
}

/// Largest relative mismatch over `grid` between the Lorentzian closed form
/// `-W0/2` and `2 g^2 omega0 / (z^2 - omega0^2 + omega0 W1(z))` at
/// `z = w + i delta`, with `W1` from quadrature. For `g = 0` the absolute
/// mismatch is returned.
pub fn verify_equivalence(
    res: &OhmicResidual,
    omega0: f64,
    g: f64,
    grid: &[f64],
    delta: f64,
    mode: EquivalenceMode,
) -> Result<(f64, Vec<EquivalencePoint>)> {
    if grid.is_empty() || grid.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::domain("equivalence grid must be non-empty and positive"));
    }
    if !(delta > 0.0) {
        return Err(Error::domain("delta must be positive"));
    }
    let tol = 1e-10;
    let j = |w: f64| res.eval(w);
    let shift = match mode {
        EquivalenceMode::Counterterm => cauchy_transform(j, res.omega_c, Complex64::new(0.0, 0.0), CauchyMode::PrincipalValue, tol)?,
        EquivalenceMode::Raw => Complex64::new(0.0, 0.0),
    };
    let gamma_width = res.gamma * omega0;
    let mut points = Vec::with_capacity(grid.len());
    for &w in grid {
        let z = Complex64::new(w, delta);
        let lhs = 2.0 * g * g * omega0 / (z * z - omega0 * omega0 + Complex64::i() * gamma_width * z);
        let w1 = cauchy_transform(j, res.omega_c, z, CauchyMode::Analytic, tol)? - shift;
        let rhs = 2.0 * g * g * omega0 / (z * z - omega0 * omega0 + omega0 * w1);
        let diff = (lhs - rhs).norm();
        let residual = if g == 0.0 { diff } else { diff / lhs.norm() };
        points.push(EquivalencePoint { frequency: w, residual });
    }
    let max = points.iter().map(|p| p.residual).fold(0.0, f64::max);
    Ok((max, points))
}
