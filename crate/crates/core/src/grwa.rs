//! Generalized rotating-wave approximation (GRWA) for the spin + mode
//! Hamiltonian.
//!
//! After the polaron transform `exp(-lambda Jx (a^dag - a))` and dropping the
//! counter-rotating terms, the Hamiltonian conserves `Jz + a^dag a`. Within a
//! sector of total spin J the excitation number `k = (m + J) + n` labels
//! small blocks; `k = 0` is the isolated ground entry `|-J, 0>`.
//!
//! Blocks are indexed by `k - 1`, so the ground entry has index -1.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{jx2_diagonal, ladder_element, ProbeParams, SectorDecomposition};
use crate::roots;
use crate::thermal::{DeltaConvention, SectorMode, SnrPoint, VarianceMode};
use crate::baseline;

pub const LAMBDA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMethod {
    Root,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSolution {
    pub lambda: f64,
    pub residual: f64,
    pub method: LambdaMethod,
}

/// `omega lambda - g + eps lambda e^{-lambda^2/2}`, i.e. `(2/N) dE_g/d lambda`.
pub fn lambda_equation(epsilon: f64, omega: f64, g: f64, lambda: f64) -> f64 {
    omega * lambda - g + epsilon * lambda * (-0.5 * lambda * lambda).exp()
}

/// Upper end of the search bracket for the variational parameter.
pub fn lambda_bracket(epsilon: f64, omega: f64, g: f64) -> f64 {
    g / omega * (1.0 + epsilon / omega) + 1.0
}

fn check_lambda_inputs(epsilon: f64, omega: f64, g: f64) -> Result<()> {
    if !(omega > 0.0) || !epsilon.is_finite() || !(g >= 0.0 && g.is_finite()) {
        return Err(Error::domain(format!("invalid GRWA inputs eps={epsilon}, omega={omega}, g={g}")));
    }
    Ok(())
}

/// Smallest root of the stationarity condition of `E_g(lambda)` in
/// `[0, lambda_bracket]`.
pub fn solve_lambda(epsilon: f64, omega: f64, g: f64, tol: f64) -> Result<LambdaSolution> {
    check_lambda_inputs(epsilon, omega, g)?;
    if g == 0.0 {
        return Ok(LambdaSolution { lambda: 0.0, residual: 0.0, method: LambdaMethod::Root });
    }
    let hi = lambda_bracket(epsilon, omega, g);
    let f = |l: f64| lambda_equation(epsilon, omega, g, l);
    let mut root = roots::smallest_root(f, 0.0, hi, 256, 1e-16, 0.0)?;
    // polish with Newton steps on the bracketed estimate
    for _ in 0..3 {
        let x = (-0.5 * root.x * root.x).exp();
        let df = omega + epsilon * x * (1.0 - root.x * root.x);
        if df == 0.0 {
            break;
        }
        let next = root.x - f(root.x) / df;
        if (0.0..=hi).contains(&next) && f(next).abs() <= f(root.x).abs() {
            root.x = next;
        }
    }
    let residual = f(root.x);
    if residual.abs() >= tol.max(f64::EPSILON * g) {
        return Err(Error::RootNotConverged { iterations: root.iterations, residual });
    }
    Ok(LambdaSolution { lambda: root.x, residual, method: LambdaMethod::Root })
}

/// `lambda ~= g / (omega + eps e^{-lambda0^2/2})`, `lambda0 = g / (eps + omega)`.
pub fn lambda_closed_form(epsilon: f64, omega: f64, g: f64) -> f64 {
    let l0 = g / (epsilon + omega);
    g / (omega + epsilon * (-0.5 * l0 * l0).exp())
}

/// `d lambda / d eps` from implicit differentiation of the stationarity
/// condition at the root.
pub fn dlambda_deps(epsilon: f64, omega: f64, lambda: f64) -> f64 {
    let x = (-0.5 * lambda * lambda).exp();
    -lambda * x / (omega + epsilon * x * (1.0 - lambda * lambda))
}

/// Derivative of [`lambda_closed_form`]-style approximation:
/// `-g e^{l0^2/2} [eps g^2 + (eps+omega)^3] / ((eps+omega)^3 (eps + omega e^{l0^2/2})^2)`.
pub fn dlambda_deps_closed_form(epsilon: f64, omega: f64, g: f64) -> f64 {
    let s = epsilon + omega;
    let l0 = g / s;
    let e = (0.5 * l0 * l0).exp();
    let s3 = s * s * s;
    -g * e * (epsilon * g * g + s3) / (s3 * (epsilon + omega * e).powi(2))
}

/// `F_n(m) = lambda^n e^{-lambda^2/2} m!/(m+n)! L_m^n(lambda^2)`.
///
/// The normalised polynomial `P_k = L_k^n k!/(k+n)!` obeys
/// `P_{k+1} = [(2k+1+n-x) P_k - k P_{k-1}] / (k+1+n)`, which stays bounded
/// for large `m`.
pub fn coefficient_f(n: u32, m: u32, lambda: f64) -> f64 {
    let x = lambda * lambda;
    let nf = n as f64;
    let inv_n_fact: f64 = (1..=n).map(|i| 1.0 / i as f64).product();
    let mut p_prev = inv_n_fact;
    let mut p = if m == 0 { p_prev } else { (1.0 + nf - x) * inv_n_fact / (nf + 1.0) };
    for k in 1..m {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + nf - x) * p - kf * p_prev) / (kf + 1.0 + nf);
        p_prev = p;
        p = next;
    }
    lambda.powi(n as i32) * (-0.5 * x).exp() * p
}

/// One conserved-excitation block.
#[derive(Debug, Clone, PartialEq)]
pub struct GrwaBlock {
    pub twice_j: u32,
    /// `k - 1`; -1 is the ground entry.
    pub excitation_index: i64,
    pub matrix: DMatrix<f64>,
    /// `(m, n)` of each row, ascending in `m`.
    pub labels: Vec<(f64, usize)>,
}

/// Builds every block of the spin-J sector with Fock index at most `n_max`.
/// Blocks near the cutoff lose their high-`n` rows, so the total dimension
/// is exactly `(2J+1)(n_max+1)`.
pub fn build_grwa_blocks(p: &ProbeParams, twice_j: u32, lambda: f64, n_max: usize) -> Result<Vec<GrwaBlock>> {
    if twice_j > p.n_spins || (p.n_spins - twice_j) % 2 != 0 {
        return Err(Error::domain(format!("2J = {twice_j} is not a sector of N = {}", p.n_spins)));
    }
    let j = twice_j as f64 / 2.0;
    let delta = p.omega * lambda * lambda - 2.0 * p.g * lambda;
    let g_tilde = p.g - p.omega * lambda;
    let f0: Vec<f64> = (0..=n_max).map(|n| coefficient_f(0, n as u32, lambda)).collect();
    let f1: Vec<f64> = (0..=n_max).map(|n| coefficient_f(1, n as u32, lambda)).collect();

    let mut blocks = Vec::with_capacity(twice_j as usize + n_max + 1);
    for k in 0..=(twice_j as usize + n_max) {
        let labels: Vec<(f64, usize)> = (0..=twice_j as usize)
            .filter(|&s| s <= k && k - s <= n_max)
            .map(|s| (s as f64 - j, k - s))
            .collect();
        let d = labels.len();
        let mut h = DMatrix::zeros(d, d);
        for (i, &(m, n)) in labels.iter().enumerate() {
            h[(i, i)] = p.omega * n as f64 + delta * jx2_diagonal(twice_j, m) + p.epsilon * m * f0[n];
        }
        for i in 0..d.saturating_sub(1) {
            // <m+1, n| H |m, n+1>
            let (m, n1) = labels[i];
            debug_assert_eq!(labels[i + 1].0, m + 1.0);
            let n = n1 - 1;
            let r = 0.5 * ladder_element(twice_j, m) * ((n + 1) as f64).sqrt() * (g_tilde + p.epsilon * f1[n]);
            h[(i, i + 1)] = r;
            h[(i + 1, i)] = r;
        }
        blocks.push(GrwaBlock { twice_j, excitation_index: k as i64 - 1, matrix: h, labels });
    }
    Ok(blocks)
}

/// Closed-form variational ground energy of the maximal sector.
pub fn ground_energy(n_spins: u32, epsilon: f64, omega: f64, g: f64, lambda: f64) -> f64 {
    let n = n_spins as f64;
    0.25 * n * (omega * lambda * lambda - 2.0 * g * lambda) - 0.5 * n * epsilon * (-0.5 * lambda * lambda).exp()
}

/// Eigenvalues of all blocks, ascending.
pub fn block_levels(blocks: &[GrwaBlock]) -> Vec<f64> {
    let mut levels: Vec<f64> = blocks
        .iter()
        .flat_map(|b| {
            if b.matrix.nrows() == 1 {
                vec![b.matrix[(0, 0)]]
            } else {
                b.matrix.clone().symmetric_eigenvalues().iter().copied().collect()
            }
        })
        .collect();
    levels.sort_by(|a, b| a.total_cmp(b));
    levels
}

/// `ln sum exp(-beta E)` over all block eigenvalues, shift-stabilised.
pub fn grwa_partition(blocks: &[GrwaBlock], beta: f64) -> f64 {
    ln_sum_exp(&[(1, block_levels(blocks))], beta)
}

fn ln_sum_exp(levels: &[(u64, Vec<f64>)], beta: f64) -> f64 {
    let ground = levels
        .iter()
        .flat_map(|(_, l)| l.first().copied())
        .fold(f64::INFINITY, f64::min);
    let z: f64 = levels
        .iter()
        .map(|(mult, l)| *mult as f64 * l.iter().map(|e| (-beta * (e - ground)).exp()).sum::<f64>())
        .sum();
    z.ln() - beta * ground
}

/// GRWA levels of every sector at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct GrwaSpectrum {
    pub lambda: f64,
    /// `(multiplicity, ascending levels)` per sector.
    pub sectors: Vec<(u64, Vec<f64>)>,
}

impl GrwaSpectrum {
    /// `params.epsilon` may be slightly negative (finite-difference stencils).
    pub fn compute(p: &ProbeParams, decomposition: &SectorDecomposition, n_max: usize) -> Result<Self> {
        let lambda = solve_lambda(p.epsilon, p.omega, p.g, LAMBDA_TOL)?.lambda;
        let sectors = decomposition
            .sectors
            .iter()
            .map(|s| Ok((s.multiplicity, block_levels(&build_grwa_blocks(p, s.twice_j, lambda, n_max)?))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { lambda, sectors })
    }

    pub fn ln_z(&self, beta: f64) -> f64 {
        ln_sum_exp(&self.sectors, beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrwaOptions {
    pub fd_step: f64,
    pub sectors: SectorMode,
    pub variance: VarianceMode,
    pub delta: DeltaConvention,
}

impl Default for GrwaOptions {
    fn default() -> Self {
        Self { fd_step: 1e-4, sectors: SectorMode::Full, variance: VarianceMode::Auto, delta: DeltaConvention::Absolute }
    }
}

/// GRWA thermodynamics on the five-point stencil `eps + k h`.
#[derive(Debug, Clone)]
pub struct GrwaEngine {
    params: ProbeParams,
    options: GrwaOptions,
    variance_mode: VarianceMode,
    stencil: [GrwaSpectrum; 5],
}

impl GrwaEngine {
    pub fn new(p: &ProbeParams, n_max: usize, options: GrwaOptions) -> Result<Self> {
        p.validate()?;
        if !(options.fd_step > 0.0) {
            return Err(Error::domain("fd_step must be positive"));
        }
        let decomposition = options.sectors.decomposition(p.n_spins)?;
        let variance_mode = match options.variance.resolve(&decomposition) {
            VarianceMode::Operator if decomposition.sectors.iter().any(|s| s.twice_j > 1) => {
                return Err(Error::domain("GRWA operator variance is only available when Jz^2 is scalar (N = 1)"))
            }
            m => m,
        };
        let h = options.fd_step;
        let build = |k: f64| GrwaSpectrum::compute(&p.with_epsilon(p.epsilon + k * h), &decomposition, n_max);
        let stencil = [build(-2.0)?, build(-1.0)?, build(0.0)?, build(1.0)?, build(2.0)?];
        Ok(Self { params: *p, options, variance_mode, stencil })
    }

    pub fn spectrum(&self) -> &GrwaSpectrum {
        &self.stencil[2]
    }

    pub fn ln_z(&self, beta: f64) -> f64 {
        self.stencil[2].ln_z(beta)
    }

    /// `<Jz> = -(1/beta) d ln Z / d eps`.
    pub fn mean_jz(&self, beta: f64) -> f64 {
        let l: Vec<f64> = self.stencil.iter().map(|s| s.ln_z(beta)).collect();
        let h = self.options.fd_step;
        let d = (l[0] - 8.0 * l[1] + 8.0 * l[3] - l[4]) / (12.0 * h);
        -d / beta
    }

    /// `d<Jz>/d eps = -(1/beta) d^2 ln Z / d eps^2`.
    pub fn d_mean_jz(&self, beta: f64) -> f64 {
        let l: Vec<f64> = self.stencil.iter().map(|s| s.ln_z(beta)).collect();
        let h = self.options.fd_step;
        let d2 = (-l[0] + 16.0 * l[1] - 30.0 * l[2] + 16.0 * l[3] - l[4]) / (12.0 * h * h);
        -d2 / beta
    }

    pub fn snr(&self, beta: f64) -> Result<SnrPoint> {
        if !(beta > 0.0) {
            return Err(Error::domain("beta must be positive"));
        }
        let n = self.params.n_spins;
        let d = self.d_mean_jz(beta);
        let (snr, variance) = match self.variance_mode {
            VarianceMode::Curvature => (-beta * d, -d / beta),
            _ => {
                let mean = self.mean_jz(beta);
                let var = 0.25 - mean * mean;
                (d * d / var, var)
            }
        };
        let threshold = 1e-14 * (n as f64).powi(2);
        if !(variance >= threshold) {
            return Err(Error::DegenerateVariance { variance, threshold });
        }
        let snr_weak = baseline::weak_snr(n, self.params.epsilon, beta).snr;
        let delta = self.options.delta;
        Ok(SnrPoint { beta, snr, snr_weak, delta_snr: delta.apply(snr, snr_weak, n), convention: delta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundEnergyDerivs {
    pub e_g: f64,
    pub de_deps: f64,
    pub d2e_deps2: f64,
    pub lambda: f64,
    pub dlambda_deps: f64,
}

/// Variational ground energy and its first two `eps` derivatives, checked
/// against central differences of `E_g(eps)` with `lambda` re-solved.
pub fn ground_energy_derivs(p: &ProbeParams) -> Result<GroundEnergyDerivs> {
    p.validate()?;
    let n = p.n_spins as f64;
    let lam = solve_lambda(p.epsilon, p.omega, p.g, LAMBDA_TOL)?.lambda;
    let x = (-0.5 * lam * lam).exp();
    let dl = dlambda_deps(p.epsilon, p.omega, lam);
    let derivs = GroundEnergyDerivs {
        e_g: ground_energy(p.n_spins, p.epsilon, p.omega, p.g, lam),
        de_deps: -0.5 * n * x,
        d2e_deps2: 0.5 * n * lam * x * dl,
        lambda: lam,
        dlambda_deps: dl,
    };

    let h = 1e-3 * p.omega;
    let e_at = |eps: f64| -> Result<f64> {
        let l = solve_lambda(eps, p.omega, p.g, LAMBDA_TOL)?.lambda;
        Ok(ground_energy(p.n_spins, eps, p.omega, p.g, l))
    };
    let (em, e0, ep) = (e_at(p.epsilon - h)?, derivs.e_g, e_at(p.epsilon + h)?);
    let (em2, ep2) = (e_at(p.epsilon - 2.0 * h)?, e_at(p.epsilon + 2.0 * h)?);
    let fd1 = (em2 - 8.0 * em + 8.0 * ep - ep2) / (12.0 * h);
    let fd2 = (-em2 + 16.0 * em - 30.0 * e0 + 16.0 * ep - ep2) / (12.0 * h * h);
    let agree = |a: f64, b: f64, floor: f64| (a - b).abs() <= 1e-3 * a.abs().max(b.abs()) + floor;
    if !agree(derivs.de_deps, fd1, 1e-10 * n) || !agree(derivs.d2e_deps2, fd2, 1e-7 * n) {
        return Err(Error::Consistency(format!(
            "analytic (dE, d2E) = ({:e}, {:e}) vs finite differences ({fd1:e}, {fd2:e})",
            derivs.de_deps, derivs.d2e_deps2
        )));
    }
    Ok(derivs)
}

/// Low-temperature SNR predicted from ground-state dominance:
/// `4 (E'')^2 / (1 - 4 E'^2)` for one spin, `-beta E''` otherwise.
pub fn asymptotic_snr(n_spins: u32, derivs: &GroundEnergyDerivs, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::domain("beta must be positive"));
    }
    if n_spins == 1 {
        let denom = 1.0 - 4.0 * derivs.de_deps * derivs.de_deps;
        if !(denom > 0.0) {
            return Err(Error::domain(format!("1 - 4 (dE/deps)^2 = {denom:e} is not positive")));
        }
        Ok(4.0 * derivs.d2e_deps2 * derivs.d2e_deps2 / denom)
    } else {
        Ok(-beta * derivs.d2e_deps2)
    }
}
