//! Exact-diagonalisation thermodynamics of the probe + reaction-coordinate
//! system.
//!
//! Each total-spin sector is diagonalised once per `epsilon`; the resulting
//! [`Spectrum`] can then be evaluated at any number of inverse temperatures.
//! Boltzmann weights carry a global ground-energy shift so that `beta * omega`
//! in the thousands neither underflows nor overflows.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::baseline;
use crate::error::{Error, Result};
use crate::operators::{
    assemble_hamiltonian, sector_multiplicities, Basis, OperatorMatrix, ProbeParams, Sector, SectorDecomposition,
    DEFAULT_DIMENSION_CAP,
};
use crate::roots;

/// Which total-spin sectors enter the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectorMode {
    /// Every J with its multiplicity; reproduces the product-space trace.
    #[default]
    Full,
    /// Only J = N/2.
    Maximal,
}

impl SectorMode {
    pub fn decomposition(self, n_spins: u32) -> Result<SectorDecomposition> {
        match self {
            SectorMode::Full => sector_multiplicities(n_spins),
            SectorMode::Maximal => {
                if n_spins == 0 {
                    return Err(Error::domain("N must be at least 1"));
                }
                Ok(SectorDecomposition::maximal(n_spins))
            }
        }
    }
}

/// How `<Jz^2>` is obtained for the SNR denominator.
///
/// * `Operator`: the eigenbasis trace of `Jz^2` in the composite Gibbs state.
/// * `Curvature`: `Z''(eps) / (Z beta^2)`, which turns the variance into
///   `-(1/beta) d<Jz>/d eps` and the SNR into `-beta d<Jz>/d eps`.
/// * `Auto`: `Operator` when `Jz^2` is a multiple of the identity on every
///   included sector (N = 1), `Curvature` otherwise.
///
/// The two agree whenever `Jz` commutes with the Hamiltonian (g = 0) and
/// separate at low temperature once the coupling mixes `Jz` eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMode {
    #[default]
    Auto,
    Operator,
    Curvature,
}

impl VarianceMode {
    pub fn resolve(self, decomposition: &SectorDecomposition) -> VarianceMode {
        match self {
            VarianceMode::Auto => {
                if decomposition.sectors.iter().all(|s| s.twice_j <= 1) {
                    VarianceMode::Operator
                } else {
                    VarianceMode::Curvature
                }
            }
            other => other,
        }
    }
}

/// How `delta_snr` is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaConvention {
    /// `S - S_weak`.
    #[default]
    Absolute,
    /// `(S - S_weak) / N`.
    PerSpin,
}

impl DeltaConvention {
    pub fn apply(self, snr: f64, snr_weak: f64, n_spins: u32) -> f64 {
        match self {
            DeltaConvention::Absolute => snr - snr_weak,
            DeltaConvention::PerSpin => (snr - snr_weak) / n_spins as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrOptions {
    /// Finite-difference step in `epsilon` (absolute, same units as omega).
    pub fd_step: f64,
    pub sectors: SectorMode,
    pub variance: VarianceMode,
    pub delta: DeltaConvention,
    pub dimension_cap: usize,
}

impl Default for SnrOptions {
    fn default() -> Self {
        Self {
            fd_step: 1e-4,
            sectors: SectorMode::Full,
            variance: VarianceMode::Auto,
            delta: DeltaConvention::Absolute,
            dimension_cap: DEFAULT_DIMENSION_CAP,
        }
    }
}

impl SnrOptions {
    /// Default options with the step scaled to `omega`.
    pub fn for_omega(omega: f64) -> Self {
        Self { fd_step: 1e-4 * omega, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal columns, same order as `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub basis: Basis,
}

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Full symmetric eigendecomposition with a deterministic ordering: ascending
/// eigenvalues, each eigenvector signed so its first non-negligible component
/// is positive.
pub fn eigendecompose(h: &OperatorMatrix) -> Result<EigenSystem> {
    let dim = h.dim();
    let eig = SymmetricEigen::try_new(h.matrix.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::Eigen { dim, max_abs: h.matrix.amax() })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut values = DVector::zeros(dim);
    let mut vectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let lead = col.iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(dst, &(col * sign));
    }
    Ok(EigenSystem { eigenvalues: values, eigenvectors: vectors, basis: h.basis })
}

/// Diagonalised sector: energies plus the diagonal of `Jz` and `Jz^2` in the
/// eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorSpectrum {
    pub sector: Sector,
    pub energies: Vec<f64>,
    pub jz: Vec<f64>,
    pub jz2: Vec<f64>,
}

/// Sector spectra for one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub params: ProbeParams,
    pub n_max: usize,
    pub sectors: Vec<SectorSpectrum>,
    /// Lowest energy across sectors; the Boltzmann shift.
    pub ground: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalObservables {
    pub beta: f64,
    pub ln_z: f64,
    pub mean_jz: f64,
    pub mean_jz2: f64,
    pub var_jz: f64,
}

impl Spectrum {
    /// Diagonalises every sector of `decomposition`. `params.epsilon` may be
    /// negative here, which finite-difference stencils rely on.
    pub fn compute(
        params: &ProbeParams,
        decomposition: &SectorDecomposition,
        n_max: usize,
        dimension_cap: usize,
    ) -> Result<Self> {
        let mut sectors = Vec::with_capacity(decomposition.sectors.len());
        for &sector in &decomposition.sectors {
            let h = assemble_hamiltonian(params, sector.twice_j, n_max, dimension_cap)?;
            let m = h.basis.m_values();
            let es = eigendecompose(&h)?;
            let dim = es.eigenvalues.len();
            let mut jz = Vec::with_capacity(dim);
            let mut jz2 = Vec::with_capacity(dim);
            for i in 0..dim {
                let v = es.eigenvectors.column(i);
                let (mut a, mut b) = (0.0, 0.0);
                for (k, &mk) in m.iter().enumerate() {
                    let w = v[k] * v[k];
                    a += w * mk;
                    b += w * mk * mk;
                }
                jz.push(a);
                jz2.push(b);
            }
            sectors.push(SectorSpectrum { sector, energies: es.eigenvalues.iter().copied().collect(), jz, jz2 });
        }
        let ground = sectors
            .iter()
            .flat_map(|s| s.energies.first().copied())
            .fold(f64::INFINITY, f64::min);
        Ok(Self { params: *params, n_max, sectors, ground })
    }

    /// Gibbs averages at inverse temperature `beta`.
    pub fn observables(&self, beta: f64) -> ThermalObservables {
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for s in &self.sectors {
            let mult = s.sector.multiplicity as f64;
            for i in 0..s.energies.len() {
                let w = mult * (-beta * (s.energies[i] - self.ground)).exp();
                z += w;
                m1 += w * s.jz[i];
                m2 += w * s.jz2[i];
            }
        }
        let mean_jz = m1 / z;
        let mean_jz2 = m2 / z;
        ThermalObservables {
            beta,
            ln_z: z.ln() - beta * self.ground,
            mean_jz,
            mean_jz2,
            var_jz: (mean_jz2 - mean_jz * mean_jz).max(0.0),
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

pub fn thermal_observables(
    p: &ProbeParams,
    beta: f64,
    n_max: usize,
    sectors: SectorMode,
) -> Result<ThermalObservables> {
    p.validate()?;
    check_beta(beta)?;
    let decomposition = sectors.decomposition(p.n_spins)?;
    Ok(Spectrum::compute(p, &decomposition, n_max, DEFAULT_DIMENSION_CAP)?.observables(beta))
}

/// Lowest `count` levels of the `J = twice_j / 2` sector.
pub fn exact_levels(p: &ProbeParams, twice_j: u32, n_max: usize, count: usize) -> Result<Vec<f64>> {
    p.validate()?;
    let h = assemble_hamiltonian(p, twice_j, n_max, DEFAULT_DIMENSION_CAP)?;
    let es = eigendecompose(&h)?;
    Ok(es.eigenvalues.iter().take(count).copied().collect())
}

/// `d^2 E_g / d eps^2` of the maximal sector by a five-point stencil.
pub fn exact_ground_curvature(p: &ProbeParams, n_max: usize, step: f64) -> Result<f64> {
    p.validate()?;
    if !(step > 0.0) {
        return Err(Error::domain("step must be positive"));
    }
    let mut e = [0.0; 5];
    for (k, slot) in e.iter_mut().enumerate() {
        let shifted = p.with_epsilon(p.epsilon + (k as f64 - 2.0) * step);
        let h = assemble_hamiltonian(&shifted, p.n_spins, n_max, DEFAULT_DIMENSION_CAP)?;
        *slot = eigendecompose(&h)?.eigenvalues[0];
    }
    Ok((-e[0] + 16.0 * e[1] - 30.0 * e[2] + 16.0 * e[3] - e[4]) / (12.0 * step * step))
}

/// One point of an SNR-versus-temperature curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub beta: f64,
    pub snr: f64,
    pub snr_weak: f64,
    pub delta_snr: f64,
    pub convention: DeltaConvention,
}

/// Detailed result of an exact SNR evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrDetail {
    pub point: SnrPoint,
    pub observables: ThermalObservables,
    /// Richardson-extrapolated `d<Jz>/d eps`.
    pub d_mean_jz: f64,
    /// Variance actually used in the denominator.
    pub variance: f64,
    pub variance_mode: VarianceMode,
}

/// Spectra on the five-point stencil `eps + k h`, `k = -2..=2`, reusable
/// across inverse temperatures.
#[derive(Debug, Clone)]
pub struct SnrEngine {
    params: ProbeParams,
    options: SnrOptions,
    variance_mode: VarianceMode,
    stencil: [Spectrum; 5],
}

impl SnrEngine {
    pub fn new(p: &ProbeParams, n_max: usize, options: SnrOptions) -> Result<Self> {
        p.validate()?;
        if !(options.fd_step > 0.0 && options.fd_step.is_finite()) {
            return Err(Error::domain(format!("fd_step must be positive, got {}", options.fd_step)));
        }
        let decomposition = options.sectors.decomposition(p.n_spins)?;
        let h = options.fd_step;
        let build = |k: f64| Spectrum::compute(&p.with_epsilon(p.epsilon + k * h), &decomposition, n_max, options.dimension_cap);
        let stencil = [build(-2.0)?, build(-1.0)?, build(0.0)?, build(1.0)?, build(2.0)?];
        Ok(Self { params: *p, options, variance_mode: options.variance.resolve(&decomposition), stencil })
    }

    pub fn params(&self) -> &ProbeParams {
        &self.params
    }

    pub fn n_max(&self) -> usize {
        self.stencil[2].n_max
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.stencil[2]
    }

    pub fn variance_mode(&self) -> VarianceMode {
        self.variance_mode
    }

    pub fn observables(&self, beta: f64) -> ThermalObservables {
        self.stencil[2].observables(beta)
    }

    /// `d<Jz>/d eps` by central differences with one Richardson step.
    pub fn d_mean_jz(&self, beta: f64) -> f64 {
        let mean = |k: usize| self.stencil[k].observables(beta).mean_jz;
        let h = self.options.fd_step;
        let d1 = (mean(3) - mean(1)) / (2.0 * h);
        let d2 = (mean(4) - mean(0)) / (4.0 * h);
        (4.0 * d1 - d2) / 3.0
    }

    /// `d ln Z / d eps` by the same stencil; equals `-beta <Jz>`.
    pub fn d_ln_z(&self, beta: f64) -> f64 {
        let ln_z = |k: usize| self.stencil[k].observables(beta).ln_z;
        let h = self.options.fd_step;
        let d1 = (ln_z(3) - ln_z(1)) / (2.0 * h);
        let d2 = (ln_z(4) - ln_z(0)) / (4.0 * h);
        (4.0 * d1 - d2) / 3.0
    }

    /// `d^2 ln Z / d eps^2` by the fourth-order five-point formula.
    pub fn d2_ln_z(&self, beta: f64) -> f64 {
        let l: Vec<f64> = self.stencil.iter().map(|s| s.observables(beta).ln_z).collect();
        let h = self.options.fd_step;
        (-l[0] + 16.0 * l[1] - 30.0 * l[2] + 16.0 * l[3] - l[4]) / (12.0 * h * h)
    }

    pub fn snr(&self, beta: f64) -> Result<SnrDetail> {
        check_beta(beta)?;
        let n = self.params.n_spins;
        let obs = self.observables(beta);
        let d = self.d_mean_jz(beta);
        let variance = match self.variance_mode {
            VarianceMode::Curvature => -d / beta,
            _ => obs.var_jz,
        };
        let threshold = 1e-14 * (n as f64).powi(2);
        if !(variance >= threshold) {
            return Err(Error::DegenerateVariance { variance, threshold });
        }
        let snr = match self.variance_mode {
            VarianceMode::Curvature => -beta * d,
            _ => d * d / variance,
        };
        let snr_weak = baseline::weak_snr(n, self.params.epsilon, beta).snr;
        let convention = self.options.delta;
        Ok(SnrDetail {
            point: SnrPoint { beta, snr, snr_weak, delta_snr: convention.apply(snr, snr_weak, n), convention },
            observables: obs,
            d_mean_jz: d,
            variance,
            variance_mode: self.variance_mode,
        })
    }
}

pub fn snr_exact(p: &ProbeParams, beta: f64, n_max: usize, options: SnrOptions) -> Result<SnrPoint> {
    check_beta(beta)?;
    Ok(SnrEngine::new(p, n_max, options)?.snr(beta)?.point)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOptions {
    pub start: usize,
    pub cap: usize,
    /// Relative tolerance on `ln Z`.
    pub ln_z_tol: f64,
    /// Relative tolerance on `<Jz>` and the SNR.
    pub obs_tol: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self { start: 16, cap: 4096, ln_z_tol: 1e-8, obs_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Converged {
    pub n_max: usize,
    pub detail: SnrDetail,
    /// Largest relative change seen in the final doubling.
    pub residual: f64,
}

fn rel_change(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Doubles the Fock cutoff from `conv.start` until `ln Z`, `<Jz>` and the
/// SNR stop moving.
pub fn converge_nmax(p: &ProbeParams, beta: f64, options: SnrOptions, conv: ConvergenceOptions) -> Result<Converged> {
    check_beta(beta)?;
    let floor = 1e-12 * p.n_spins as f64;
    let mut n_max = conv.start.max(1);
    let mut previous: Option<SnrDetail> = None;
    loop {
        let dim = (p.n_spins as usize + 1) * (n_max + 1);
        if n_max > conv.cap || dim > options.dimension_cap {
            return Err(Error::Truncation(format!(
                "no convergence up to n_max = {} (beta = {beta}, g = {})",
                n_max / 2,
                p.g
            )));
        }
        let detail = SnrEngine::new(p, n_max, options)?.snr(beta)?;
        if let Some(prev) = previous {
            let a = rel_change(detail.observables.ln_z, prev.observables.ln_z, floor);
            let b = rel_change(detail.observables.mean_jz, prev.observables.mean_jz, floor);
            let c = rel_change(detail.point.snr, prev.point.snr, floor);
            if a < conv.ln_z_tol && b < conv.obs_tol && c < conv.obs_tol {
                return Ok(Converged { n_max, detail, residual: a.max(b).max(c) });
            }
        } else if p.g == 0.0 {
            return Ok(Converged { n_max, detail, residual: 0.0 });
        }
        previous = Some(detail);
        n_max *= 2;
    }
}

/// Probe density matrix after tracing out the mode, resolved by sector. Each
/// block describes one copy of its sector; the full state is the direct sum
/// over `multiplicity` copies, so `sum mult * tr(block) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub blocks: Vec<(Sector, DMatrix<f64>)>,
}

impl ReducedState {
    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|(s, b)| s.multiplicity as f64 * b.trace()).sum()
    }

    /// Smallest eigenvalue over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|(_, b)| b.clone().symmetric_eigenvalues().iter().copied().collect::<Vec<_>>())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mean_jz(&self) -> f64 {
        self.blocks
            .iter()
            .map(|(s, b)| {
                let j = s.twice_j as f64 / 2.0;
                s.multiplicity as f64 * (0..b.nrows()).map(|k| b[(k, k)] * (k as f64 - j)).sum::<f64>()
            })
            .sum()
    }
}

pub fn reduced_probe_state(p: &ProbeParams, beta: f64, n_max: usize, sectors: SectorMode) -> Result<ReducedState> {
    p.validate()?;
    check_beta(beta)?;
    let decomposition = sectors.decomposition(p.n_spins)?;
    let mut raw = Vec::new();
    let mut ground = f64::INFINITY;
    for &sector in &decomposition.sectors {
        let h = assemble_hamiltonian(p, sector.twice_j, n_max, DEFAULT_DIMENSION_CAP)?;
        let es = eigendecompose(&h)?;
        ground = ground.min(es.eigenvalues[0]);
        raw.push((sector, es));
    }
    let nb = n_max + 1;
    let mut z = 0.0;
    let mut blocks = Vec::new();
    for (sector, es) in raw {
        let ds = sector.twice_j as usize + 1;
        let mut rho = DMatrix::zeros(ds, ds);
        for (i, &e) in es.eigenvalues.iter().enumerate() {
            let w = (-beta * (e - ground)).exp();
            if w == 0.0 {
                continue;
            }
            z += sector.multiplicity as f64 * w;
            let v = es.eigenvectors.column(i);
            for a in 0..ds {
                for b in 0..=a {
                    let s: f64 = (0..nb).map(|n| v[a * nb + n] * v[b * nb + n]).sum();
                    rho[(a, b)] += w * s;
                }
            }
        }
        rho.fill_upper_triangle_with_lower_triangle();
        blocks.push((sector, rho));
    }
    for (_, rho) in &mut blocks {
        *rho /= z;
    }
    Ok(ReducedState { blocks })
}

/// Gibbs state of `H_s = theta_eps * Jz` at unit inverse temperature, in the
/// same sector layout as `like`.
pub fn spin_gibbs_state(like: &ReducedState, theta_eps: f64) -> ReducedState {
    let mut z = 0.0;
    let mut blocks: Vec<(Sector, DMatrix<f64>)> = like
        .blocks
        .iter()
        .map(|(s, _)| {
            let j = s.twice_j as f64 / 2.0;
            // shift by the largest |m| to keep the exponent bounded
            let d = DVector::from_iterator(
                s.twice_j as usize + 1,
                (0..=s.twice_j).map(|k| (-theta_eps * (k as f64 - j) - theta_eps.abs() * like_jmax(like)).exp()),
            );
            z += s.multiplicity as f64 * d.sum();
            (*s, DMatrix::from_diagonal(&d))
        })
        .collect();
    for (_, b) in &mut blocks {
        *b /= z;
    }
    ReducedState { blocks }
}

fn like_jmax(state: &ReducedState) -> f64 {
    state.blocks.iter().map(|(s, _)| s.twice_j as f64 / 2.0).fold(0.0, f64::max)
}

fn matrix_log_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = m.clone().symmetric_eigen();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &lam) in e.eigenvalues.iter().enumerate() {
        if lam <= 1e-300 {
            return Err(Error::domain("reference state is not full rank"));
        }
        let v = e.eigenvectors.column(i);
        out += v * v.transpose() * lam.ln();
    }
    Ok(out)
}

/// Quantum relative entropy `S(rho || sigma)` for sector-resolved states with
/// a full-rank `sigma`.
pub fn relative_entropy(rho: &ReducedState, sigma: &ReducedState) -> Result<f64> {
    let mut total = 0.0;
    for ((s, r), (_, q)) in rho.blocks.iter().zip(&sigma.blocks) {
        let er = r.clone().symmetric_eigen();
        let mut r_log_r = 0.0;
        for &lam in er.eigenvalues.iter() {
            if lam > 1e-300 {
                r_log_r += lam * lam.ln();
            }
        }
        let log_q = matrix_log_psd(q)?;
        total += s.multiplicity as f64 * (r_log_r - (r * log_q).trace());
    }
    Ok(total.max(0.0))
}

/// Relative entropy to the closest state of the form `exp(-theta Jz) / Z`.
/// The optimum matches `<Jz>`, so `theta` is found by root finding on that
/// moment.
pub fn distance_to_best_gibbs(rho: &ReducedState) -> Result<(f64, f64)> {
    let target = rho.mean_jz();
    let jmax = like_jmax(rho);
    if target.abs() >= jmax * rho.blocks.iter().map(|(s, _)| s.multiplicity as f64).sum::<f64>() {
        return Err(Error::domain("state is pure in Jz; no finite Gibbs fit"));
    }
    let f = |theta: f64| spin_gibbs_state(rho, theta).mean_jz() - target;
    let mut hi = 1.0;
    while f(hi) > 0.0 && hi < 1e3 {
        hi *= 2.0;
    }
    let mut lo = -1.0;
    while f(lo) < 0.0 && lo > -1e3 {
        lo *= 2.0;
    }
    let theta = roots::brent(f, lo, hi, 1e-14, 0.0)?.x;
    Ok((theta, relative_entropy(rho, &spin_gibbs_state(rho, theta))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::build_mapped_hamiltonian;

    fn params(n: u32, eps: f64, g: f64) -> ProbeParams {
        ProbeParams::new(n, eps, 1.0, g).unwrap()
    }

    #[test]
    fn diagonal_sorted() {
        let h = OperatorMatrix {
            basis: Basis::Spin { twice_j: 2 },
            matrix: DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0])),
        };
        let es = eigendecompose(&h).unwrap();
        assert_eq!(es.eigenvalues.as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(es.eigenvectors[(1, 0)], 1.0);
    }

    #[test]
    fn pauli_x() {
        let h = OperatorMatrix {
            basis: Basis::Spin { twice_j: 1 },
            matrix: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        };
        let es = eigendecompose(&h).unwrap();
        assert!((es.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((es.eigenvalues[1] - 1.0).abs() < 1e-15);
        for i in 0..2 {
            assert!(es.eigenvectors[(0, i)] > 0.0);
        }
    }

    #[test]
    fn eigensystem_orthonormal_and_diagonalising() {
        let p = params(2, 0.9, 0.6);
        let h = build_mapped_hamiltonian(&p, 2, 20, DEFAULT_DIMENSION_CAP).unwrap();
        let es = eigendecompose(&h).unwrap();
        let v = &es.eigenvectors;
        let id = DMatrix::<f64>::identity(v.ncols(), v.ncols());
        assert!((v.transpose() * v - &id).amax() < 1e-10);
        let d = v.transpose() * &h.matrix * v;
        let off = d.clone() - DMatrix::from_diagonal(&d.diagonal());
        assert!(off.amax() < 1e-8 * h.matrix.norm());
        assert!(es.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn polaron_ground_energy() {
        let p = params(1, 0.0, 0.5);
        let h = build_mapped_hamiltonian(&p, 1, 60, DEFAULT_DIMENSION_CAP).unwrap();
        let es = eigendecompose(&h).unwrap();
        assert!((es.eigenvalues[0] + 0.25 * 0.25).abs() < 1e-8);
    }

    #[test]
    fn decoupled_levels_and_flat_curvature() {
        let p = params(1, 0.6, 0.0);
        let levels = exact_levels(&p, 1, 4, 4).unwrap();
        for (a, b) in levels.iter().zip([-0.3, 0.3, 0.7, 1.3]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(exact_ground_curvature(&p, 4, 1e-3).unwrap().abs() < 1e-6);
    }

    #[test]
    fn coupled_ground_curvature_is_negative() {
        for n in 1..=3 {
            let c = exact_ground_curvature(&params(n, 1.0, 0.3), 24, 1e-3).unwrap();
            assert!(c < 0.0, "N={n}: {c}");
        }
    }

    #[test]
    fn decoupled_mean_matches_baseline() {
        for n in 1..=4 {
            for beta in [0.3, 2.0, 15.0] {
                let eps = 0.7;
                let o = thermal_observables(&params(n, eps, 0.0), beta, 8, SectorMode::Full).unwrap();
                let w = baseline::weak_snr(n, eps, beta);
                assert!((o.mean_jz - w.mean_jz).abs() < 1e-12);
                assert!((o.var_jz - w.var_jz).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_frequency_has_zero_mean() {
        for n in 1..=3 {
            let o = thermal_observables(&params(n, 0.0, 0.7), 3.0, 30, SectorMode::Full).unwrap();
            assert!(o.mean_jz.abs() < 1e-10, "N={n}: {}", o.mean_jz);
        }
    }

    #[test]
    fn sector_sum_matches_product_space() {
        let (eps, beta, n_max) = (0.8, 1.7, 10);
        for n in 1..=5 {
            let o = thermal_observables(&params(n, eps, 0.0), beta, n_max, SectorMode::Full).unwrap();
            let z_boson: f64 = (0..=n_max).map(|k| (-beta * k as f64).exp()).sum();
            let want = n as f64 * (2.0 * (0.5 * beta * eps).cosh()).ln() + z_boson.ln();
            assert!((o.ln_z - want).abs() < 1e-12 * want.abs());
        }
    }

    #[test]
    fn no_underflow_at_very_low_temperature() {
        let o = thermal_observables(&params(2, 1.0, 0.3), 1000.0, 16, SectorMode::Full).unwrap();
        assert!(o.ln_z.is_finite() && o.mean_jz.is_finite());
    }

    #[test]
    fn hellmann_feynman_consistency() {
        for n in 1..=3 {
            for g in [0.1, 0.4] {
                for beta in [1.0, 10.0, 40.0] {
                    let p = params(n, 1.0, g);
                    let engine = SnrEngine::new(&p, 24, SnrOptions::default()).unwrap();
                    let from_z = -engine.d_ln_z(beta) / beta;
                    let mean = engine.observables(beta).mean_jz;
                    assert!((from_z - mean).abs() < 1e-6 * mean.abs(), "N={n} g={g} beta={beta}");
                }
            }
        }
    }

    #[test]
    fn curvature_equals_trace_when_jz_conserved() {
        for n in 1..=3 {
            let p = params(n, 0.9, 0.0);
            let engine = SnrEngine::new(&p, 4, SnrOptions { fd_step: 1e-3, ..SnrOptions::default() }).unwrap();
            for beta in [0.5, 3.0] {
                let o = engine.observables(beta);
                let z2 = engine.d2_ln_z(beta) / (beta * beta) + o.mean_jz * o.mean_jz;
                assert!((z2 - o.mean_jz2).abs() < 1e-4 * o.mean_jz2, "N={n} beta={beta}");
            }
        }
    }

    #[test]
    fn curvature_close_to_trace_at_high_temperature() {
        let p = params(2, 1.0, 0.1);
        let engine = SnrEngine::new(&p, 48, SnrOptions { fd_step: 1e-3, ..SnrOptions::default() }).unwrap();
        let beta = 0.05;
        let o = engine.observables(beta);
        let z2 = engine.d2_ln_z(beta) / (beta * beta) + o.mean_jz * o.mean_jz;
        assert!((z2 - o.mean_jz2).abs() < 1e-4 * o.mean_jz2, "{z2} vs {}", o.mean_jz2);
    }

    /// With the spin and mode coupled, `Z''/(Z beta^2)` is a Kubo variance and
    /// falls below the operator variance at low temperature.
    #[test]
    fn curvature_and_trace_separate_at_low_temperature() {
        let p = params(2, 1.0, 0.3);
        let engine = SnrEngine::new(&p, 32, SnrOptions::default()).unwrap();
        let beta = 40.0;
        let o = engine.observables(beta);
        let kubo = -engine.d_mean_jz(beta) / beta;
        assert!(kubo < 0.5 * o.var_jz, "{kubo} vs {}", o.var_jz);
    }

    #[test]
    fn weak_coupling_reduction() {
        for n in 1..=3 {
            for beta in [1.0, 10.0] {
                let p = params(n, 0.2, 1e-4);
                let pt = snr_exact(&p, beta, 16, SnrOptions::default()).unwrap();
                assert!((pt.snr / pt.snr_weak - 1.0).abs() < 1e-4, "N={n} beta={beta}: {}", pt.snr / pt.snr_weak);
            }
        }
    }

    #[test]
    fn per_spin_delta() {
        let p = params(3, 1.0, 0.3);
        let opts = SnrOptions { delta: DeltaConvention::PerSpin, ..SnrOptions::default() };
        let pt = snr_exact(&p, 5.0, 24, opts).unwrap();
        assert!((pt.delta_snr - (pt.snr - pt.snr_weak) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn auto_variance_resolution() {
        let one = sector_multiplicities(1).unwrap();
        let three = sector_multiplicities(3).unwrap();
        assert_eq!(VarianceMode::Auto.resolve(&one), VarianceMode::Operator);
        assert_eq!(VarianceMode::Auto.resolve(&three), VarianceMode::Curvature);
        assert_eq!(VarianceMode::Operator.resolve(&three), VarianceMode::Operator);
    }

    #[test]
    fn degenerate_variance_reported() {
        let p = params(1, 1.0, 0.0);
        let err = snr_exact(&p, 800.0, 4, SnrOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateVariance { .. }));
    }

    #[test]
    fn decoupled_converges_immediately() {
        let c = converge_nmax(&params(2, 1.0, 0.0), 3.0, SnrOptions::default(), ConvergenceOptions::default()).unwrap();
        assert_eq!(c.n_max, 16);
    }

    #[test]
    fn truncation_grows_with_coupling_and_temperature() {
        let conv = ConvergenceOptions::default();
        let at = |g: f64, beta: f64| converge_nmax(&params(1, 1.0, g), beta, SnrOptions::default(), conv).unwrap().n_max;
        let by_g: Vec<usize> = [0.1, 0.5, 1.0].iter().map(|&g| at(g, 2.0)).collect();
        assert!(by_g.windows(2).all(|w| w[0] <= w[1]), "{by_g:?}");
        let by_t: Vec<usize> = [10.0, 1.0, 0.1].iter().map(|&b| at(0.5, b)).collect();
        assert!(by_t.windows(2).all(|w| w[0] <= w[1]), "{by_t:?}");
        assert!(by_t[2] > by_t[0]);
    }

    #[test]
    fn truncation_cap_reported() {
        let conv = ConvergenceOptions { cap: 32, ..ConvergenceOptions::default() };
        let err = converge_nmax(&params(1, 1.0, 2.0), 0.02, SnrOptions::default(), conv).unwrap_err();
        assert!(matches!(err, Error::Truncation(_)));
    }

    #[test]
    fn snr_cauchy_converges_under_doubling() {
        let p = params(1, 1.0, 0.6);
        let s: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&n| snr_exact(&p, 2.0, n, SnrOptions::default()).unwrap().snr)
            .collect();
        let d: Vec<f64> = s.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(d[1] < 1e-3 * d[0], "{d:?}");
        // beyond 32 levels the change sits at finite-difference round-off
        assert!(d[1].max(d[2]) < 1e-8 * s[3], "{d:?}");
    }

    #[test]
    fn reduced_state_is_a_state() {
        for n in 1..=3 {
            let rho = reduced_probe_state(&params(n, 1.0, 0.6), 2.0, 24, SectorMode::Full).unwrap();
            assert!((rho.trace() - 1.0).abs() < 1e-12);
            assert!(rho.min_eigenvalue() > -1e-12);
            for (_, b) in &rho.blocks {
                assert_eq!(b, &b.transpose());
            }
        }
    }

    #[test]
    fn reduced_state_mean_matches_thermal_trace() {
        let p = params(3, 0.8, 0.5);
        let rho = reduced_probe_state(&p, 3.0, 24, SectorMode::Full).unwrap();
        let o = thermal_observables(&p, 3.0, 24, SectorMode::Full).unwrap();
        assert!((rho.mean_jz() - o.mean_jz).abs() < 1e-12);
    }

    #[test]
    fn weak_coupling_state_is_canonical() {
        for n in 1..=3 {
            let (eps, beta) = (1.0, 2.0);
            let rho = reduced_probe_state(&params(n, eps, 1e-6), beta, 8, SectorMode::Full).unwrap();
            let gibbs = spin_gibbs_state(&rho, beta * eps);
            for ((_, a), (_, b)) in rho.blocks.iter().zip(&gibbs.blocks) {
                assert!((a - b).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn single_spin_strong_coupling_departs_from_canonical() {
        let (eps, beta) = (1.0, 2.0);
        let rho = reduced_probe_state(&params(1, eps, 0.8), beta, 40, SectorMode::Full).unwrap();
        let d = relative_entropy(&rho, &spin_gibbs_state(&rho, beta * eps)).unwrap();
        assert!(d > 1e-4, "{d}");
    }

    #[test]
    fn strong_coupling_state_is_not_gibbsian() {
        let rho = reduced_probe_state(&params(2, 1.0, 0.8), 2.0, 40, SectorMode::Full).unwrap();
        let (_, d) = distance_to_best_gibbs(&rho).unwrap();
        assert!(d > 1e-6, "{d}");
        let weak = reduced_probe_state(&params(2, 1.0, 1e-5), 2.0, 8, SectorMode::Full).unwrap();
        let (theta, d0) = distance_to_best_gibbs(&weak).unwrap();
        assert!(d0 < 1e-12 && (theta - 2.0).abs() < 1e-6);
    }
}
