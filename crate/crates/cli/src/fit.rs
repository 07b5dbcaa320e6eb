//! Power-law fits `S ~ T^theta` on SNR tables.

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::SnrRow;

pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Exponent in `S ~ T^theta`.
    pub theta: f64,
    pub stderr: f64,
    /// `ln S` at `T = 1` (in units of omega).
    pub intercept: f64,
    pub r_squared: f64,
    /// `(beta omega)` window actually used.
    pub window: (f64, f64),
    pub points: usize,
}

/// Least-squares slope of `ln S` against `ln T = -ln(beta omega)` over the
/// points with `beta omega` in `window` (inclusive).
pub fn fit_scaling(points: &[(f64, f64)], window: (f64, f64)) -> Result<ScalingFit> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(CliError::Fit(format!("empty window [{lo}, {hi}]")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut used = (f64::INFINITY, f64::NEG_INFINITY);
    for &(beta_omega, snr) in points {
        if beta_omega < lo || beta_omega > hi {
            continue;
        }
        if !(snr > 0.0 && snr.is_finite() && beta_omega > 0.0) {
            return Err(CliError::Fit(format!("non-positive SNR {snr} at beta omega = {beta_omega}")));
        }
        xs.push(-beta_omega.ln());
        ys.push(snr.ln());
        used = (used.0.min(beta_omega), used.1.max(beta_omega));
    }
    let n = xs.len();
    if n < MIN_FIT_POINTS {
        return Err(CliError::Fit(format!("{n} points in [{lo}, {hi}], need at least {MIN_FIT_POINTS}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(CliError::Fit("all points share one temperature".into()));
    }
    let theta = sxy / sxx;
    let intercept = my - theta * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - theta * x).powi(2)).sum();
    let stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let flat = syy <= nf * (16.0 * f64::EPSILON * scale).powi(2);
    let r_squared = if flat { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    Ok(ScalingFit { theta, stderr, intercept, r_squared, window: used, points: n })
}

/// [`fit_scaling`] on table rows; every row in the window must be converged
/// and carry an SNR.
pub fn fit_rows(rows: &[SnrRow], window: (f64, f64)) -> Result<ScalingFit> {
    let mut points = Vec::new();
    for r in rows.iter().filter(|r| r.beta_omega >= window.0 && r.beta_omega <= window.1) {
        match r.snr {
            Some(s) if r.converged => points.push((r.beta_omega, s)),
            _ => return Err(CliError::Fit(format!("unconverged point at beta omega = {}", r.beta_omega))),
        }
    }
    fit_scaling(&points, window)
}

/// The constant `c` minimising `sum (ln(c * model) - ln(reference))^2`.
pub fn fit_prefactor(model: &[f64], reference: &[f64]) -> Result<f64> {
    if model.len() != reference.len() || model.is_empty() {
        return Err(CliError::Fit("prefactor fit needs two equal, non-empty series".into()));
    }
    let mut acc = 0.0;
    for (m, r) in model.iter().zip(reference) {
        if !(*m > 0.0 && *r > 0.0) {
            return Err(CliError::Fit(format!("prefactor fit needs positive values (got {m}, {r})")));
        }
        acc += (r / m).ln();
    }
    Ok((acc / model.len() as f64).exp())
}
