//! Oscillator networks and the change to the mode-operator picture.
//!
//! A universe of `n_system + n_reservoir` oscillators with masses `m_k`,
//! bare frequencies `ϖ_k` and position couplings `λ_kj`:
//!
//! ```text
//! H = ½ Σ_k (p_k²/m_k + m_k ϖ_k² q_k²) + ¼ Σ_kj λ_kj (q_k − q_j)²
//! ```
//!
//! Rewriting with annihilation operators at the renormalized frequencies
//! `ω_k² = ϖ_k² + (1/m_k) Σ_{j≠k} λ_kj` gives bilinear couplings
//! `g_kj = λ_kj / (2 √(m_k m_j ω_k ω_j))`. Expanding the potential shows the
//! cross term enters as `−½ Σ_kj g_kj (a_k + a_k†)(a_j + a_j†)`; that sign is
//! what the propagator equations integrate.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the smallest eigenvalue of the potential matrix.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Number of leading modes that form the system of interest.
    pub n_system: usize,
    pub masses: Vec<f64>,
    pub bare_frequencies: Vec<f64>,
    /// Row-major square coupling matrix `λ_kj`.
    pub couplings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    ShapeMismatch { detail: String },
    NoSystemModes,
    NonFinite { what: String, index: usize },
    NonPositiveMass { mode: usize, value: f64 },
    NonPositiveFrequency { mode: usize, value: f64 },
    AsymmetricCoupling { row: usize, col: usize },
    NonZeroDiagonal { mode: usize, value: f64 },
    NotPositiveSemidefinite { min_eigenvalue: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_physical(&self) -> bool {
        self.violations.is_empty()
    }
}

impl NetworkSpec {
    pub fn n_modes(&self) -> usize {
        self.masses.len()
    }

    pub fn n_reservoir(&self) -> usize {
        self.n_modes().saturating_sub(self.n_system)
    }

    pub fn coupling_matrix(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        DMatrix::from_fn(n, n, |k, j| self.couplings[k][j])
    }

    /// Position-position matrix `K` of the potential, `V = ½ qᵀ K q`.
    pub fn potential_matrix(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        let lambda = self.coupling_matrix();
        let mut k = -lambda.clone();
        for i in 0..n {
            let row_sum: f64 = (0..n).filter(|&j| j != i).map(|j| lambda[(i, j)]).sum();
            k[(i, i)] = self.masses[i] * self.bare_frequencies[i].powi(2) + row_sum;
        }
        k
    }

    /// Mass-weighted potential `M^{-1/2} K M^{-1/2}`; its eigenvalues are the
    /// squared normal-mode frequencies.
    pub fn mass_weighted_potential(&self) -> DMatrix<f64> {
        let k = self.potential_matrix();
        let n = self.n_modes();
        DMatrix::from_fn(n, n, |i, j| k[(i, j)] / (self.masses[i] * self.masses[j]).sqrt())
    }
}

fn shape_ok(spec: &NetworkSpec) -> Option<String> {
    let n = spec.masses.len();
    if spec.bare_frequencies.len() != n {
        return Some(format!(
            "{} masses but {} bare frequencies",
            n,
            spec.bare_frequencies.len()
        ));
    }
    if spec.couplings.len() != n || spec.couplings.iter().any(|r| r.len() != n) {
        return Some(format!("coupling matrix is not {n}x{n}"));
    }
    if spec.n_system > n {
        return Some(format!("n_system = {} exceeds {} modes", spec.n_system, n));
    }
    None
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Checks every physicality invariant and reports all failures.
pub fn validate(spec: &NetworkSpec) -> ValidationReport {
    let mut violations = Vec::new();
    if let Some(detail) = shape_ok(spec) {
        violations.push(Violation::ShapeMismatch { detail });
        return ValidationReport { violations };
    }
    if spec.n_system == 0 {
        violations.push(Violation::NoSystemModes);
    }
    let n = spec.n_modes();
    let mut finite = true;
    for (what, values) in [("mass", &spec.masses), ("bare_frequency", &spec.bare_frequencies)] {
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                finite = false;
                violations.push(Violation::NonFinite { what: what.into(), index });
            }
        }
    }
    for (k, row) in spec.couplings.iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            finite = false;
            violations.push(Violation::NonFinite { what: "coupling_row".into(), index: k });
        }
    }
    for (mode, &value) in spec.masses.iter().enumerate() {
        if value.is_finite() && value <= 0.0 {
            violations.push(Violation::NonPositiveMass { mode, value });
        }
    }
    for (mode, &value) in spec.bare_frequencies.iter().enumerate() {
        if value.is_finite() && value <= 0.0 {
            violations.push(Violation::NonPositiveFrequency { mode, value });
        }
    }
    for k in 0..n {
        let d = spec.couplings[k][k];
        if d != 0.0 {
            violations.push(Violation::NonZeroDiagonal { mode: k, value: d });
        }
        for j in (k + 1)..n {
            if spec.couplings[k][j] != spec.couplings[j][k] {
                violations.push(Violation::AsymmetricCoupling { row: k, col: j });
            }
        }
    }
    if finite && spec.masses.iter().all(|&m| m > 0.0) {
        let k = spec.potential_matrix();
        let norm = k.abs().max().max(f64::MIN_POSITIVE);
        let min = min_eigenvalue(&k);
        if min < -PSD_TOLERANCE * norm {
            violations.push(Violation::NotPositiveSemidefinite { min_eigenvalue: min });
        }
    }
    ValidationReport { violations }
}

/// Mode-picture network: renormalized frequencies `ω_k` and couplings `g_kj`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormalizedNetwork {
    pub n_system: usize,
    pub frequencies: Vec<f64>,
    pub mode_couplings: DMatrix<f64>,
}

impl RenormalizedNetwork {
    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    pub fn n_reservoir(&self) -> usize {
        self.n_modes() - self.n_system
    }

    /// Uncoupled network with the given frequencies.
    pub fn uncoupled(n_system: usize, frequencies: Vec<f64>) -> Self {
        let n = frequencies.len();
        Self { n_system, frequencies, mode_couplings: DMatrix::zeros(n, n) }
    }

    /// One system mode at `system_frequency` coupled with strengths `couplings`
    /// to reservoir modes at `reservoir_frequencies` (mode picture).
    pub fn star(system_frequency: f64, reservoir_frequencies: &[f64], couplings: &[f64]) -> Self {
        assert_eq!(reservoir_frequencies.len(), couplings.len());
        let n = reservoir_frequencies.len() + 1;
        let mut frequencies = Vec::with_capacity(n);
        frequencies.push(system_frequency);
        frequencies.extend_from_slice(reservoir_frequencies);
        let mut g = DMatrix::zeros(n, n);
        for (j, &c) in couplings.iter().enumerate() {
            g[(0, j + 1)] = c;
            g[(j + 1, 0)] = c;
        }
        Self { n_system: 1, frequencies, mode_couplings: g }
    }

    /// Largest frequency in the network.
    pub fn max_frequency(&self) -> f64 {
        self.frequencies.iter().copied().fold(0.0, f64::max)
    }

    /// Matrix of the `x̃` quadratic form, `diag(ω) − 2g`, in units where
    /// `x̃_k = (a_k + a_k†)/√2`. Congruent to the potential matrix, so it is
    /// positive semidefinite exactly when the original network is.
    pub fn position_form(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        DMatrix::from_fn(n, n, |k, j| {
            let d = if k == j { self.frequencies[k] } else { 0.0 };
            d - 2.0 * self.mode_couplings[(k, j)]
        })
    }

    /// Inverts the renormalization for the given masses, returning the
    /// position-coupled network that maps back onto `self`.
    pub fn to_network_spec(&self, masses: &[f64]) -> Result<NetworkSpec> {
        let n = self.n_modes();
        if masses.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} masses for {} modes",
                masses.len(),
                n
            )));
        }
        let w = &self.frequencies;
        let lambda: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| {
                        if k == j {
                            0.0
                        } else {
                            2.0 * self.mode_couplings[(k, j)] * (masses[k] * masses[j] * w[k] * w[j]).sqrt()
                        }
                    })
                    .collect()
            })
            .collect();
        let mut bare = Vec::with_capacity(n);
        for k in 0..n {
            let sum: f64 = lambda[k].iter().sum();
            let sq = w[k] * w[k] - sum / masses[k];
            if sq <= 0.0 {
                return Err(Error::NonPositiveRadicand { mode: k, value: sq });
            }
            bare.push(sq.sqrt());
        }
        Ok(NetworkSpec {
            n_system: self.n_system,
            masses: masses.to_vec(),
            bare_frequencies: bare,
            couplings: lambda,
        })
    }
}

/// Renormalized frequencies and mode couplings of a network.
pub fn renormalize(spec: &NetworkSpec) -> Result<RenormalizedNetwork> {
    if let Some(detail) = shape_ok(spec) {
        return Err(Error::ShapeMismatch(detail));
    }
    let n = spec.n_modes();
    for k in 0..n {
        for j in (k + 1)..n {
            if spec.couplings[k][j] != spec.couplings[j][k] {
                return Err(Error::AsymmetricCoupling(k, j));
            }
        }
    }
    let mut frequencies = Vec::with_capacity(n);
    for k in 0..n {
        let sum: f64 = (0..n).filter(|&j| j != k).map(|j| spec.couplings[k][j]).sum();
        let sq = spec.bare_frequencies[k].powi(2) + sum / spec.masses[k];
        if !(sq > 0.0) {
            return Err(Error::NonPositiveRadicand { mode: k, value: sq });
        }
        frequencies.push(sq.sqrt());
    }
    let g = DMatrix::from_fn(n, n, |k, j| {
        let l = spec.couplings[k][j];
        if k == j || l == 0.0 {
            0.0
        } else {
            l / (2.0 * (spec.masses[k] * spec.masses[j] * frequencies[k] * frequencies[j]).sqrt())
        }
    });
    Ok(RenormalizedNetwork { n_system: spec.n_system, frequencies, mode_couplings: g })
}

/// Parameters of a star network: one central oscillator of mass `system_mass`
/// coupled through its position to reservoir oscillators of common mass
/// `reservoir_mass`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarParams {
    pub system_mass: f64,
    pub reservoir_mass: f64,
    pub system_bare_frequency: f64,
    pub reservoir_bare_frequencies: Vec<f64>,
    /// `λ_1j` for each reservoir mode.
    pub couplings: Vec<f64>,
}

impl StarParams {
    pub fn to_network_spec(&self) -> NetworkSpec {
        let n = self.reservoir_bare_frequencies.len() + 1;
        let mut masses = vec![self.reservoir_mass; n];
        masses[0] = self.system_mass;
        let mut bare = Vec::with_capacity(n);
        bare.push(self.system_bare_frequency);
        bare.extend_from_slice(&self.reservoir_bare_frequencies);
        let mut couplings = vec![vec![0.0; n]; n];
        for (j, &l) in self.couplings.iter().enumerate() {
            couplings[0][j + 1] = l;
            couplings[j + 1][0] = l;
        }
        NetworkSpec { n_system: 1, masses, bare_frequencies: bare, couplings }
    }
}

/// Star-network renormalization with distinct central and reservoir masses.
pub fn single_mode_scaled(params: &StarParams) -> Result<RenormalizedNetwork> {
    if params.couplings.len() != params.reservoir_bare_frequencies.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} couplings for {} reservoir modes",
            params.couplings.len(),
            params.reservoir_bare_frequencies.len()
        )));
    }
    let big = params.system_mass;
    let mu = params.reservoir_mass;
    let total: f64 = params.couplings.iter().sum();
    let w1_sq = params.system_bare_frequency.powi(2) + total / big;
    if !(w1_sq > 0.0) {
        return Err(Error::NonPositiveRadicand { mode: 0, value: w1_sq });
    }
    let w1 = w1_sq.sqrt();
    let mut wj = Vec::with_capacity(params.couplings.len());
    let mut gj = Vec::with_capacity(params.couplings.len());
    for (j, (&bare, &l)) in params.reservoir_bare_frequencies.iter().zip(&params.couplings).enumerate() {
        let sq = bare * bare + l / mu;
        if !(sq > 0.0) {
            return Err(Error::NonPositiveRadicand { mode: j + 1, value: sq });
        }
        let w = sq.sqrt();
        wj.push(w);
        gj.push(l / (2.0 * (mu * big).sqrt() * (w1 * w).sqrt()));
    }
    Ok(RenormalizedNetwork::star(w1, &wj, &gj))
}

/// Star renormalization for a general spec, rejecting couplings off the star.
pub fn single_mode_scaled_from_spec(spec: &NetworkSpec) -> Result<RenormalizedNetwork> {
    if let Some(detail) = shape_ok(spec) {
        return Err(Error::ShapeMismatch(detail));
    }
    let n = spec.n_modes();
    for k in 1..n {
        for j in 1..n {
            if spec.couplings[k][j] != 0.0 {
                return Err(Error::NonStarTopology(k, j));
            }
        }
    }
    let mu = spec.masses.get(1).copied().unwrap_or(1.0);
    if spec.masses.iter().skip(1).any(|&m| m != mu) {
        return Err(Error::InvalidNetwork("reservoir masses differ".into()));
    }
    let params = StarParams {
        system_mass: spec.masses[0],
        reservoir_mass: mu,
        system_bare_frequency: spec.bare_frequencies[0],
        reservoir_bare_frequencies: spec.bare_frequencies[1..].to_vec(),
        couplings: spec.couplings[0][1..].to_vec(),
    };
    single_mode_scaled(&params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_mode(lambda: f64) -> NetworkSpec {
        NetworkSpec {
            n_system: 1,
            masses: vec![1.0, 1.0],
            bare_frequencies: vec![1.0, 1.0],
            couplings: vec![vec![0.0, lambda], vec![lambda, 0.0]],
        }
    }

    #[test]
    fn uncoupled_limit() {
        let spec = NetworkSpec {
            n_system: 1,
            masses: vec![1.0, 3.0],
            bare_frequencies: vec![1.0, 2.0],
            couplings: vec![vec![0.0; 2]; 2],
        };
        let r = renormalize(&spec).unwrap();
        assert_eq!(r.frequencies, vec![1.0, 2.0]);
        assert!(r.mode_couplings.iter().all(|&g| g == 0.0));
        assert!(validate(&spec).is_physical());
    }

    #[test]
    fn two_mode_substitution() {
        let r = renormalize(&two_mode(3.0)).unwrap();
        assert_relative_eq!(r.frequencies[0], 2.0, epsilon = 1e-15);
        assert_relative_eq!(r.frequencies[1], 2.0, epsilon = 1e-15);
        // 3 / (2 √(1·1·2·2))
        assert_relative_eq!(r.mode_couplings[(0, 1)], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn asymmetric_coupling_flagged() {
        let mut spec = two_mode(0.5);
        spec.couplings[1][0] = -0.5;
        let report = validate(&spec);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::AsymmetricCoupling { row: 0, col: 1 })));
        assert_eq!(renormalize(&spec), Err(Error::AsymmetricCoupling(0, 1)));
    }

    #[test]
    fn negative_coupling_breaks_positivity() {
        // λ = −0.6 leaves ω² = 0.4 > 0 but K = [[0.4, 0.6], [0.6, 0.4]] has eigenvalue −0.2.
        let spec = two_mode(-0.6);
        let report = validate(&spec);
        let min = report
            .violations
            .iter()
            .find_map(|v| match v {
                Violation::NotPositiveSemidefinite { min_eigenvalue } => Some(*min_eigenvalue),
                _ => None,
            })
            .expect("flagged");
        // brute force: eigenvalues of [[a, b], [b, a]] are a ± b
        assert_relative_eq!(min, 0.4 - 0.6, epsilon = 1e-12);
    }

    #[test]
    fn nonzero_diagonal_and_masses_flagged() {
        let mut spec = two_mode(0.1);
        spec.couplings[0][0] = 0.2;
        spec.masses[1] = 0.0;
        spec.bare_frequencies[0] = -1.0;
        let v = validate(&spec).violations;
        assert!(v.iter().any(|x| matches!(x, Violation::NonZeroDiagonal { mode: 0, .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::NonPositiveMass { mode: 1, .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::NonPositiveFrequency { mode: 0, .. })));
    }

    #[test]
    fn radicand_error() {
        let spec = NetworkSpec {
            n_system: 1,
            masses: vec![1.0, 1.0],
            bare_frequencies: vec![0.1, 1.0],
            couplings: vec![vec![0.0, -1.0], vec![-1.0, 0.0]],
        };
        assert!(matches!(renormalize(&spec), Err(Error::NonPositiveRadicand { mode: 0, .. })));
    }

    #[test]
    fn star_scaled_limits() {
        let p = StarParams {
            system_mass: 5.0,
            reservoir_mass: 0.5,
            system_bare_frequency: 1.3,
            reservoir_bare_frequencies: vec![0.7, 2.0],
            couplings: vec![0.0, 0.0],
        };
        let r = single_mode_scaled(&p).unwrap();
        assert_eq!(r.frequencies[0], 1.3);
        assert!(r.mode_couplings.iter().all(|&g| g == 0.0));

        let p = StarParams {
            system_mass: 1.0,
            reservoir_mass: 1.0,
            system_bare_frequency: 1.0,
            reservoir_bare_frequencies: vec![1.0],
            couplings: vec![3.0],
        };
        let r = single_mode_scaled(&p).unwrap();
        assert_relative_eq!(r.frequencies[0], 2.0, epsilon = 1e-15);
        assert_relative_eq!(r.frequencies[1], 2.0, epsilon = 1e-15);
        assert_relative_eq!(r.mode_couplings[(0, 1)], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn star_scaled_matches_generic() {
        let p = StarParams {
            system_mass: 100.0,
            reservoir_mass: 1.0,
            system_bare_frequency: 1.0,
            reservoir_bare_frequencies: vec![0.5, 0.9, 1.4, 2.2],
            couplings: vec![0.1, 0.3, 0.2, 0.4],
        };
        let a = single_mode_scaled(&p).unwrap();
        let b = renormalize(&p.to_network_spec()).unwrap();
        for k in 0..5 {
            assert_relative_eq!(a.frequencies[k], b.frequencies[k], max_relative = 1e-14);
            for j in 0..5 {
                assert_relative_eq!(
                    a.mode_couplings[(k, j)],
                    b.mode_couplings[(k, j)],
                    max_relative = 1e-14
                );
            }
        }
    }

    #[test]
    fn off_star_rejected() {
        let mut spec = StarParams {
            system_mass: 1.0,
            reservoir_mass: 1.0,
            system_bare_frequency: 1.0,
            reservoir_bare_frequencies: vec![1.0, 1.0],
            couplings: vec![0.1, 0.1],
        }
        .to_network_spec();
        spec.couplings[1][2] = 0.05;
        spec.couplings[2][1] = 0.05;
        assert_eq!(single_mode_scaled_from_spec(&spec), Err(Error::NonStarTopology(1, 2)));
    }

    #[test]
    fn inverse_round_trip() {
        let spec = NetworkSpec {
            n_system: 2,
            masses: vec![1.0, 2.0, 0.5],
            bare_frequencies: vec![1.0, 1.5, 0.8],
            couplings: vec![vec![0.0, 0.2, 0.1], vec![0.2, 0.0, 0.3], vec![0.1, 0.3, 0.0]],
        };
        let r = renormalize(&spec).unwrap();
        let back = r.to_network_spec(&spec.masses).unwrap();
        for k in 0..3 {
            assert_relative_eq!(back.bare_frequencies[k], spec.bare_frequencies[k], max_relative = 1e-12);
            for j in 0..3 {
                assert_relative_eq!(back.couplings[k][j], spec.couplings[k][j], max_relative = 1e-12);
            }
        }
    }
}
