//! Collective-spin and truncated-boson matrices, total-spin sector bookkeeping,
//! and the composite probe + reaction-coordinate Hamiltonian
//!
//! ```text
//! H = eps * Jz (x) 1 + omega * 1 (x) n + g * Jx (x) (a + a^dag)
//! ```
//!
//! Everything is real: `Jy` is carried as the antisymmetric matrix `B` with
//! `Jy = i B`. Composite bases order the spin index slow and the Fock index
//! fast, i.e. `|m, n>` sits at row `(m + J) * (n_max + 1) + n`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on composite matrix dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 20_000;

/// Physical parameters of the composite probe + reaction-coordinate system,
/// in angular-frequency units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    /// Number of spin-1/2 particles.
    pub n_spins: u32,
    /// Probe frequency to be estimated.
    pub epsilon: f64,
    /// Reaction-coordinate mode frequency.
    pub omega: f64,
    /// Probe–mode coupling.
    pub g: f64,
}

impl ProbeParams {
    pub fn new(n_spins: u32, epsilon: f64, omega: f64, g: f64) -> Result<Self> {
        let p = Self { n_spins, epsilon, omega, g };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_spins == 0 {
            return Err(Error::domain("N must be at least 1"));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::domain(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::domain(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(Error::domain(format!("g must be >= 0, got {}", self.g)));
        }
        Ok(())
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn with_g(self, g: f64) -> Self {
        Self { g, ..self }
    }

    /// Twice the maximal total spin, `N`.
    pub fn twice_j_max(&self) -> u32 {
        self.n_spins
    }
}

/// Basis descriptor attached to every operator matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// `|J, m>`, m ascending from -J.
    Spin { twice_j: u32 },
    /// Fock states `|0> .. |n_max>`.
    Fock { n_max: usize },
    /// `|J, m> (x) |n>`, spin index slow, Fock index fast.
    Composite { twice_j: u32, n_max: usize },
}

impl Basis {
    pub fn dim(&self) -> usize {
        match *self {
            Basis::Spin { twice_j } => twice_j as usize + 1,
            Basis::Fock { n_max } => n_max + 1,
            Basis::Composite { twice_j, n_max } => (twice_j as usize + 1) * (n_max + 1),
        }
    }

    /// `m` value of each basis row (zero for pure Fock bases).
    pub fn m_values(&self) -> Vec<f64> {
        match *self {
            Basis::Spin { twice_j } => (0..=twice_j).map(|k| m_of(twice_j, k)).collect(),
            Basis::Fock { n_max } => vec![0.0; n_max + 1],
            Basis::Composite { twice_j, n_max } => (0..=twice_j)
                .flat_map(|k| std::iter::repeat(m_of(twice_j, k)).take(n_max + 1))
                .collect(),
        }
    }

    /// Fock number of each basis row (zero for pure spin bases).
    pub fn n_values(&self) -> Vec<usize> {
        match *self {
            Basis::Spin { twice_j } => vec![0; twice_j as usize + 1],
            Basis::Fock { n_max } => (0..=n_max).collect(),
            Basis::Composite { twice_j, n_max } => {
                (0..=twice_j).flat_map(|_| 0..=n_max).collect()
            }
        }
    }
}

fn m_of(twice_j: u32, k: u32) -> f64 {
    k as f64 - twice_j as f64 / 2.0
}

/// A dense real matrix together with the basis it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub basis: Basis,
    pub matrix: DMatrix<f64>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Exact (bitwise) symmetry check.
    pub fn is_symmetric(&self) -> bool {
        let m = &self.matrix;
        (0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)].to_bits() == m[(j, i)].to_bits()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators {
    pub jx: OperatorMatrix,
    /// Real antisymmetric `B` with `Jy = i B`.
    pub jy_imag: OperatorMatrix,
    pub jz: OperatorMatrix,
}

/// Converts a spin value to `2J`, rejecting anything that is not a
/// non-negative half-integer.
pub fn twice_spin(j: f64) -> Result<u32> {
    let twice = 2.0 * j;
    if !(twice >= 0.0) || (twice - twice.round()).abs() > 1e-12 || twice > u32::MAX as f64 {
        return Err(Error::domain(format!("spin {j} is not a non-negative half-integer")));
    }
    Ok(twice.round() as u32)
}

/// `<m+1| J+ |m> = sqrt(J(J+1) - m(m+1))`.
pub fn ladder_element(twice_j: u32, m: f64) -> f64 {
    let j = twice_j as f64 / 2.0;
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// `<m|Jx^2|m> = (J(J+1) - m^2) / 2`.
pub fn jx2_diagonal(twice_j: u32, m: f64) -> f64 {
    let j = twice_j as f64 / 2.0;
    0.5 * (j * (j + 1.0) - m * m)
}

pub fn spin_operators(j: f64) -> Result<SpinOperators> {
    Ok(spin_operators_twice(twice_spin(j)?))
}

pub fn spin_operators_twice(twice_j: u32) -> SpinOperators {
    let dim = twice_j as usize + 1;
    let basis = Basis::Spin { twice_j };
    let mut jx = DMatrix::zeros(dim, dim);
    let mut jy = DMatrix::zeros(dim, dim);
    let mut jz = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let m = m_of(twice_j, k as u32);
        jz[(k, k)] = m;
        if k + 1 < dim {
            let half = 0.5 * ladder_element(twice_j, m);
            jx[(k, k + 1)] = half;
            jx[(k + 1, k)] = half;
            // Jy = (J+ - J-) / 2i, so B = -i Jy has B[m+1, m] = -half, B[m, m+1] = +half.
            jy[(k + 1, k)] = -half;
            jy[(k, k + 1)] = half;
        }
    }
    SpinOperators {
        jx: OperatorMatrix { basis, matrix: jx },
        jy_imag: OperatorMatrix { basis, matrix: jy },
        jz: OperatorMatrix { basis, matrix: jz },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BosonOperators {
    /// `a + a^dag`, truncated.
    pub position: OperatorMatrix,
    pub number: OperatorMatrix,
    /// Annihilation operator `a`, truncated.
    pub annihilation: OperatorMatrix,
}

pub fn boson_operators(n_max: usize) -> Result<BosonOperators> {
    if n_max < 1 {
        return Err(Error::domain("Fock cutoff must be at least 1"));
    }
    let dim = n_max + 1;
    let basis = Basis::Fock { n_max };
    let mut x = DMatrix::zeros(dim, dim);
    let mut a = DMatrix::zeros(dim, dim);
    let mut n = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        n[(k, k)] = k as f64;
        if k + 1 < dim {
            let s = ((k + 1) as f64).sqrt();
            a[(k, k + 1)] = s;
            x[(k, k + 1)] = s;
            x[(k + 1, k)] = s;
        }
    }
    Ok(BosonOperators {
        position: OperatorMatrix { basis, matrix: x },
        number: OperatorMatrix { basis, matrix: n },
        annihilation: OperatorMatrix { basis, matrix: a },
    })
}

/// One total-spin sector of the N-spin product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sector {
    pub twice_j: u32,
    pub multiplicity: u64,
}

impl Sector {
    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorDecomposition {
    pub n_spins: u32,
    /// Sectors in descending J.
    pub sectors: Vec<Sector>,
}

impl SectorDecomposition {
    pub fn total_dimension(&self) -> u128 {
        self.sectors.iter().map(|s| s.multiplicity as u128 * (s.twice_j as u128 + 1)).sum()
    }

    /// Only the maximal sector J = N/2.
    pub fn maximal(n_spins: u32) -> Self {
        Self { n_spins, sectors: vec![Sector { twice_j: n_spins, multiplicity: 1 }] }
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Multiplicity of each total spin J in N spin-1/2 particles:
/// `C(N, N/2 - J) - C(N, N/2 - J - 1)`.
pub fn sector_multiplicities(n_spins: u32) -> Result<SectorDecomposition> {
    if n_spins == 0 {
        return Err(Error::domain("N must be at least 1"));
    }
    let n = n_spins as u64;
    let sectors = (0..=n / 2)
        .map(|k| {
            // k = N/2 - J
            let lower = if k == 0 { 0 } else { binomial(n, k - 1) };
            Sector { twice_j: (n - 2 * k) as u32, multiplicity: binomial(n, k) - lower }
        })
        .collect();
    Ok(SectorDecomposition { n_spins, sectors })
}

/// Assembles the composite Hamiltonian in spin sector `twice_j` with Fock
/// cutoff `n_max`.
pub fn build_mapped_hamiltonian(
    p: &ProbeParams,
    twice_j: u32,
    n_max: usize,
    dimension_cap: usize,
) -> Result<OperatorMatrix> {
    p.validate()?;
    assemble_hamiltonian(p, twice_j, n_max, dimension_cap)
}

/// Same as [`build_mapped_hamiltonian`] but accepts any finite `epsilon`, so
/// finite-difference stencils may step below zero.
pub(crate) fn assemble_hamiltonian(
    p: &ProbeParams,
    twice_j: u32,
    n_max: usize,
    dimension_cap: usize,
) -> Result<OperatorMatrix> {
    if !p.epsilon.is_finite() {
        return Err(Error::domain("epsilon must be finite"));
    }
    if n_max < 1 {
        return Err(Error::domain("Fock cutoff must be at least 1"));
    }
    if twice_j > p.n_spins || (p.n_spins - twice_j) % 2 != 0 {
        return Err(Error::domain(format!(
            "J = {} is not a total spin of N = {} spins",
            twice_j as f64 / 2.0,
            p.n_spins
        )));
    }
    let basis = Basis::Composite { twice_j, n_max };
    let dim = basis.dim();
    if dim > dimension_cap {
        return Err(Error::DimensionCap { dim, cap: dimension_cap });
    }

    let nb = n_max + 1;
    let mut h = DMatrix::zeros(dim, dim);
    for k in 0..=twice_j as usize {
        let m = m_of(twice_j, k as u32);
        for n in 0..nb {
            let row = k * nb + n;
            h[(row, row)] = p.epsilon * m + p.omega * n as f64;
        }
        if k < twice_j as usize {
            // g * <m+1|Jx|m> * <n'|a + a^dag|n>
            let c = p.g * 0.5 * ladder_element(twice_j, m);
            for n in 0..nb - 1 {
                let v = c * ((n + 1) as f64).sqrt();
                for (r, s) in [(k * nb + n, (k + 1) * nb + n + 1), (k * nb + n + 1, (k + 1) * nb + n)] {
                    h[(r, s)] = v;
                    h[(s, r)] = v;
                }
            }
        }
    }
    Ok(OperatorMatrix { basis, matrix: h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym_eigs(m: &DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let s = spin_operators(0.5).unwrap();
        assert_eq!(s.jz.matrix, DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.5]));
        assert_eq!(s.jx.matrix[(0, 1)], 0.5);
        assert_eq!(s.jx.matrix[(1, 0)], 0.5);
    }

    #[test]
    fn spin_one_ladder() {
        let s = spin_operators(1.0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!((s.jx.matrix[(i, j)] - r).abs() < 1e-15);
        }
        assert_eq!(s.jx.matrix[(0, 2)], 0.0);
    }

    #[test]
    fn rejects_non_half_integer_spin() {
        assert!(matches!(spin_operators(0.3), Err(Error::Domain(_))));
        assert!(matches!(spin_operators(-0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn commutator_identity_up_to_spin_four() {
        // [Jx, Jy] = i Jz with Jy = iB  <=>  Jx B - B Jx = Jz
        for twice_j in 0..=8 {
            let s = spin_operators_twice(twice_j);
            let (x, b, z) = (&s.jx.matrix, &s.jy_imag.matrix, &s.jz.matrix);
            let c = x * b - b * x;
            assert!((c - z).abs().max() < 1e-13, "2J = {twice_j}");
            assert_eq!(b.transpose(), -b.clone());
        }
    }

    #[test]
    fn casimir_equals_j_j_plus_one() {
        for twice_j in 0..=8 {
            let s = spin_operators_twice(twice_j);
            let (x, b, z) = (&s.jx.matrix, &s.jy_imag.matrix, &s.jz.matrix);
            // Jy^2 = -B^2
            let c = x * x - b * b + z * z;
            let j = twice_j as f64 / 2.0;
            let id = DMatrix::<f64>::identity(twice_j as usize + 1, twice_j as usize + 1) * (j * (j + 1.0));
            assert!((c - id).abs().max() < 1e-12);
        }
    }

    #[test]
    fn boson_matrices() {
        let b = boson_operators(1).unwrap();
        assert_eq!(b.position.matrix, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let b = boson_operators(2).unwrap();
        assert_eq!(b.position.matrix[(0, 1)], 1.0);
        assert_eq!(b.position.matrix[(1, 2)], 2f64.sqrt());
        assert_eq!(b.number.matrix, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 2.0])));
        assert!(boson_operators(0).is_err());
    }

    #[test]
    fn canonical_commutator_below_cutoff() {
        let n_max = 12;
        let b = boson_operators(n_max).unwrap();
        let a = &b.annihilation.matrix;
        let c = a * a.transpose() - a.transpose() * a;
        for i in 0..n_max {
            for j in 0..n_max {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((c[(i, j)] - want).abs() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn multiplicities_small_n() {
        let s = sector_multiplicities(1).unwrap();
        assert_eq!(s.sectors, vec![Sector { twice_j: 1, multiplicity: 1 }]);
        let s = sector_multiplicities(2).unwrap();
        assert_eq!(s.sectors, vec![Sector { twice_j: 2, multiplicity: 1 }, Sector { twice_j: 0, multiplicity: 1 }]);
        let s = sector_multiplicities(3).unwrap();
        assert_eq!(s.sectors, vec![Sector { twice_j: 3, multiplicity: 1 }, Sector { twice_j: 1, multiplicity: 2 }]);
    }

    /// Oracle: diagonalise J^2 on the full 2^N product space and count
    /// eigenvalue multiplicities.
    #[test]
    fn multiplicities_match_brute_force_casimir() {
        for n in 1..=6u32 {
            let dim = 1usize << n;
            let mut jx = DMatrix::<f64>::zeros(dim, dim);
            let mut jz = DMatrix::<f64>::zeros(dim, dim);
            let mut b = DMatrix::<f64>::zeros(dim, dim);
            for s in 0..dim {
                for site in 0..n {
                    let up = (s >> site) & 1 == 1;
                    jz[(s, s)] += if up { 0.5 } else { -0.5 };
                    let t = s ^ (1 << site);
                    jx[(t, s)] += 0.5;
                    // B = -i * sigma_y / 2: <up|B|down> = -1/2, <down|B|up> = 1/2
                    b[(t, s)] += if up { 0.5 } else { -0.5 };
                }
            }
            let j2 = &jx * &jx - &b * &b + &jz * &jz;
            let eigs = sym_eigs(&j2);
            let decomposition = sector_multiplicities(n).unwrap();
            for sector in &decomposition.sectors {
                let j = sector.j();
                let target = j * (j + 1.0);
                let count = eigs.iter().filter(|&&e| (e - target).abs() < 1e-8).count() as u64;
                assert_eq!(count, sector.multiplicity * (sector.twice_j as u64 + 1), "N={n}, J={j}");
            }
        }
    }

    #[test]
    fn total_dimension_identity() {
        for n in 1..=12u32 {
            assert_eq!(sector_multiplicities(n).unwrap().total_dimension(), 1u128 << n);
        }
    }

    #[test]
    fn decoupled_spectrum() {
        let (eps, om) = (0.7, 1.3);
        let p = ProbeParams::new(1, eps, om, 0.0).unwrap();
        let h = build_mapped_hamiltonian(&p, 1, 1, DEFAULT_DIMENSION_CAP).unwrap();
        let got = sym_eigs(&h.matrix);
        let mut want = vec![-eps / 2.0, eps / 2.0, om - eps / 2.0, om + eps / 2.0];
        want.sort_by(|a, b| a.total_cmp(b));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn displaced_oscillator_ground_energy() {
        // eps = 0: H = omega n + g Jx (a + a^dag), ground -g^2 / (4 omega)
        let (om, g) = (1.0, 0.5);
        let p = ProbeParams::new(1, 0.0, om, g).unwrap();
        let h = build_mapped_hamiltonian(&p, 1, 60, DEFAULT_DIMENSION_CAP).unwrap();
        let e0 = sym_eigs(&h.matrix)[0];
        assert!((e0 + g * g / (4.0 * om)).abs() < 1e-10, "{e0}");
    }

    #[test]
    fn dimension_guard() {
        let p = ProbeParams::new(4, 1.0, 1.0, 0.1).unwrap();
        let err = build_mapped_hamiltonian(&p, 4, 100, 200).unwrap_err();
        assert_eq!(err, Error::DimensionCap { dim: 505, cap: 200 });
    }

    #[test]
    fn rejects_foreign_sector() {
        let p = ProbeParams::new(3, 1.0, 1.0, 0.1).unwrap();
        assert!(build_mapped_hamiltonian(&p, 2, 4, DEFAULT_DIMENSION_CAP).is_err());
        assert!(build_mapped_hamiltonian(&p, 5, 4, DEFAULT_DIMENSION_CAP).is_err());
    }

    #[test]
    fn matches_kronecker_construction() {
        let p = ProbeParams::new(3, 0.8, 1.1, 0.37).unwrap();
        let n_max = 5;
        let s = spin_operators_twice(3);
        let b = boson_operators(n_max).unwrap();
        let i_s = DMatrix::<f64>::identity(4, 4);
        let i_b = DMatrix::<f64>::identity(n_max + 1, n_max + 1);
        let want = s.jz.matrix.kronecker(&i_b) * p.epsilon
            + i_s.kronecker(&b.number.matrix) * p.omega
            + s.jx.matrix.kronecker(&b.position.matrix) * p.g;
        let h = build_mapped_hamiltonian(&p, 3, n_max, DEFAULT_DIMENSION_CAP).unwrap();
        assert!((h.matrix - want).abs().max() < 1e-15);
    }

    proptest! {
        #[test]
        fn hamiltonian_bitwise_symmetric(
            n in 1u32..5, eps in 0.0f64..3.0, om in 0.1f64..3.0, g in 0.0f64..2.0, n_max in 1usize..12
        ) {
            let p = ProbeParams::new(n, eps, om, g).unwrap();
            for sector in sector_multiplicities(n).unwrap().sectors {
                let h = build_mapped_hamiltonian(&p, sector.twice_j, n_max, DEFAULT_DIMENSION_CAP).unwrap();
                prop_assert!(h.is_symmetric());
                prop_assert_eq!(h.dim(), (sector.twice_j as usize + 1) * (n_max + 1));
            }
        }
    }
}
