//! Bogoliubov propagator blocks of the full universe.
//!
//! Row `k` of `(U, V)` obeys
//!
//! ```text
//! dU_kj/dt =  iω_j U_kj − i Σ_n (U_kn − V_kn) g_nj
//! dV_kj/dt = −iω_j V_kj − i Σ_n (U_kn − V_kn) g_nj
//! ```
//!
//! with `U(0) = 𝟙`, `V(0) = 0`. Rows are independent. Stored blocks are
//! indexed (row = evolved mode, column = source mode) and relate to the
//! Heisenberg-picture operators by
//! `a_k(t) = Σ_j (U_kj* a_j + V_kj* a_j†)`.
//! The dual phase-space map therefore reads `β'_j = Σ_k (U_kj β_k − V_kj* β_k*)`,
//! i.e. the transpose of the stored block acts on the characteristic-function
//! argument.
//!
//! Backends: [`evolve_uv`] (adaptive Runge–Kutta), [`normal_mode_oracle`]
//! (exact diagonalization of the quadratic form), and the single-mode memory
//! kernel path in [`crate::kernel`].

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::bogoliubov_from_quadrature;
use crate::network::{NetworkSpec, RenormalizedNetwork, PSD_TOLERANCE};
use crate::ode::{integrate, OdeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMode {
    #[default]
    Full,
    /// Counter-rotating terms dropped; `V ≡ 0`.
    Rwa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RowSelection {
    #[default]
    SystemOnly,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UVTrajectory {
    pub times: Vec<f64>,
    pub u: Vec<DMatrix<C>>,
    pub v: Vec<DMatrix<C>>,
    pub mode: PropagationMode,
    pub n_system: usize,
}

impl UVTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_rows(&self) -> usize {
        self.u.first().map_or(0, |m| m.nrows())
    }

    pub fn n_modes(&self) -> usize {
        self.u.first().map_or(0, |m| m.ncols())
    }

    /// System-system blocks `(U_kj, V_kj)` for `k, j < n_system` at grid index `i`.
    pub fn system_block(&self, i: usize) -> (DMatrix<C>, DMatrix<C>) {
        let m = self.n_system;
        (
            self.u[i].view((0, 0), (m, m)).into_owned(),
            self.v[i].view((0, 0), (m, m)).into_owned(),
        )
    }

    /// System-row, reservoir-column blocks at grid index `i`.
    pub fn reservoir_block(&self, i: usize) -> (DMatrix<C>, DMatrix<C>) {
        let m = self.n_system;
        let r = self.n_modes() - m;
        (
            self.u[i].view((0, m), (m, r)).into_owned(),
            self.v[i].view((0, m), (m, r)).into_owned(),
        )
    }

    pub(crate) fn check_system_rows(&self) -> Result<()> {
        if self.n_rows() < self.n_system || self.n_system == 0 {
            return Err(Error::ShapeMismatch(format!(
                "trajectory keeps {} rows but {} system modes are required",
                self.n_rows(),
                self.n_system
            )));
        }
        Ok(())
    }

    /// Largest deviation from `UU† − VV† = 𝟙` and `UVᵀ − VUᵀ = 0` over the
    /// grid. Only meaningful when all rows are kept.
    pub fn bogoliubov_defect(&self) -> (f64, f64) {
        let mut d1: f64 = 0.0;
        let mut d2: f64 = 0.0;
        for (u, v) in self.u.iter().zip(&self.v) {
            let n = u.nrows();
            let id = DMatrix::<C>::identity(n, n);
            let a = u * u.adjoint() - v * v.adjoint() - id;
            let b = u * v.transpose() - v * u.transpose();
            d1 = d1.max(a.iter().map(|z| z.norm()).fold(0.0, f64::max));
            d2 = d2.max(b.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        (d1, d2)
    }
}

/// Nonzero couplings per column: `(n, g_nj)` lists.
#[derive(Debug, Clone)]
pub(crate) struct CouplingColumns {
    cols: Vec<Vec<(usize, f64)>>,
}

impl CouplingColumns {
    pub(crate) fn new(net: &RenormalizedNetwork) -> Self {
        let n = net.n_modes();
        let cols = (0..n)
            .map(|j| {
                (0..n)
                    .filter_map(|k| {
                        let g = net.mode_couplings[(k, j)];
                        (g != 0.0).then_some((k, g))
                    })
                    .collect()
            })
            .collect();
        Self { cols }
    }
}

/// Right-hand side for one propagator row.
pub(crate) fn row_rhs(
    freqs: &[f64],
    cols: &CouplingColumns,
    mode: PropagationMode,
    u: &[C],
    v: &[C],
    du: &mut [C],
    dv: &mut [C],
) {
    let i = C::i();
    for (j, col) in cols.cols.iter().enumerate() {
        let mut s = C::new(0.0, 0.0);
        match mode {
            PropagationMode::Full => {
                for &(n, g) in col {
                    s += (u[n] - v[n]) * g;
                }
                du[j] = i * (u[j] * freqs[j] - s);
                dv[j] = -i * (v[j] * freqs[j] + s);
            }
            PropagationMode::Rwa => {
                for &(n, g) in col {
                    s += u[n] * g;
                }
                du[j] = i * (u[j] * freqs[j] - s);
                dv[j] = C::new(0.0, 0.0);
            }
        }
    }
}

/// Time derivative of a propagator row, straight from the equations of motion.
pub fn row_derivative(
    net: &RenormalizedNetwork,
    mode: PropagationMode,
    u: &[C],
    v: &[C],
) -> (Vec<C>, Vec<C>) {
    let cols = CouplingColumns::new(net);
    let n = net.n_modes();
    let mut du = vec![C::new(0.0, 0.0); n];
    let mut dv = vec![C::new(0.0, 0.0); n];
    row_rhs(&net.frequencies, &cols, mode, u, v, &mut du, &mut dv);
    (du, dv)
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidTimeGrid("empty time grid".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidTimeGrid(format!("grid starts at {} instead of 0", times[0])));
    }
    if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidTimeGrid(format!("grid not increasing at index {}", i + 1)));
    }
    Ok(())
}

/// Integrates the propagator rows of `net` onto `times`.
pub fn evolve_uv(
    net: &RenormalizedNetwork,
    times: &[f64],
    rows: RowSelection,
    mode: PropagationMode,
    opts: &OdeOptions,
) -> Result<UVTrajectory> {
    check_grid(times)?;
    let n = net.n_modes();
    let n_rows = match rows {
        RowSelection::SystemOnly => net.n_system,
        RowSelection::All => n,
    };
    let cols = CouplingColumns::new(net);
    let freqs = &net.frequencies;
    let solved: Vec<Vec<Vec<C>>> = (0..n_rows)
        .into_par_iter()
        .map(|k| {
            let mut y0 = vec![C::new(0.0, 0.0); 2 * n];
            y0[k] = C::new(1.0, 0.0);
            integrate(
                |_, y, dy| {
                    let (u, v) = y.split_at(n);
                    let (du, dv) = dy.split_at_mut(n);
                    row_rhs(freqs, &cols, mode, u, v, du, dv);
                },
                &y0,
                times,
                opts,
            )
        })
        .collect::<Result<_>>()?;

    let mut u = Vec::with_capacity(times.len());
    let mut v = Vec::with_capacity(times.len());
    for ti in 0..times.len() {
        u.push(DMatrix::from_fn(n_rows, n, |k, j| solved[k][ti][j]));
        v.push(match mode {
            PropagationMode::Rwa => DMatrix::zeros(n_rows, n),
            PropagationMode::Full => DMatrix::from_fn(n_rows, n, |k, j| solved[k][ti][n + j]),
        });
    }
    Ok(UVTrajectory { times: times.to_vec(), u, v, mode, n_system: net.n_system })
}

/// Exact normal-mode decomposition of a position-coupled network.
#[derive(Debug, Clone)]
pub struct NormalModes {
    n_system: usize,
    /// `√ω_k` per mode, the quadrature scaling of mass-weighted coordinates.
    scale: Vec<f64>,
    /// Squared normal frequencies.
    omega_sq: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl NormalModes {
    pub fn new(spec: &NetworkSpec) -> Result<Self> {
        let w = spec.mass_weighted_potential();
        let norm = w.abs().max().max(f64::MIN_POSITIVE);
        let scale: Vec<f64> = (0..spec.n_modes()).map(|k| w[(k, k)]).collect();
        for (k, &s) in scale.iter().enumerate() {
            if !(s > 0.0) {
                return Err(Error::NonPositiveRadicand { mode: k, value: s });
            }
        }
        let eig = SymmetricEigen::new(w);
        let mut omega_sq = Vec::with_capacity(eig.eigenvalues.len());
        for &l in eig.eigenvalues.iter() {
            if l < -PSD_TOLERANCE * norm {
                return Err(Error::NotPositiveSemidefinite(l));
            }
            omega_sq.push(l.max(0.0));
        }
        Ok(Self {
            n_system: spec.n_system,
            scale: scale.into_iter().map(|s| s.sqrt().sqrt()).collect(),
            omega_sq,
            vectors: eig.eigenvectors,
        })
    }

    pub fn normal_frequencies(&self) -> Vec<f64> {
        self.omega_sq.iter().map(|s| s.sqrt()).collect()
    }

    /// Heisenberg map of the quadratures `(x̃₁, p̃₁, x̃₂, p̃₂, …)` with
    /// `a_k = (x̃_k + i p̃_k)/√2`: `r(t) = T r(0)`.
    pub fn quadrature_map(&self, t: f64) -> DMatrix<f64> {
        let n = self.scale.len();
        let o = &self.vectors;
        let mut cos_d = DMatrix::zeros(n, n);
        let mut sinc_d = DMatrix::zeros(n, n);
        let mut wsin_d = DMatrix::zeros(n, n);
        for (m, &w2) in self.omega_sq.iter().enumerate() {
            let w = w2.sqrt();
            let (s, c) = (w * t).sin_cos();
            cos_d[(m, m)] = c;
            sinc_d[(m, m)] = if w * t.abs() < 1e-8 { t } else { s / w };
            wsin_d[(m, m)] = w * s;
        }
        let cc = o * cos_d * o.transpose();
        let ss = o * sinc_d * o.transpose();
        let ws = o * wsin_d * o.transpose();
        let d = &self.scale;
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            for j in 0..n {
                out[(2 * k, 2 * j)] = d[k] * cc[(k, j)] / d[j];
                out[(2 * k, 2 * j + 1)] = d[k] * ss[(k, j)] * d[j];
                out[(2 * k + 1, 2 * j)] = -ws[(k, j)] / (d[k] * d[j]);
                out[(2 * k + 1, 2 * j + 1)] = cc[(k, j)] * d[j] / d[k];
            }
        }
        out
    }

    /// Full-universe `(U, V)` at time `t`.
    pub fn uv(&self, t: f64) -> (DMatrix<C>, DMatrix<C>) {
        bogoliubov_from_quadrature(&self.quadrature_map(t))
    }

    pub fn trajectory(&self, times: &[f64]) -> Result<UVTrajectory> {
        check_grid(times)?;
        let (u, v): (Vec<_>, Vec<_>) = times.par_iter().map(|&t| self.uv(t)).unzip();
        Ok(UVTrajectory {
            times: times.to_vec(),
            u,
            v,
            mode: PropagationMode::Full,
            n_system: self.n_system,
        })
    }
}

/// `(U, V)` of the full universe at time `t` by exact diagonalization.
pub fn normal_mode_oracle(spec: &NetworkSpec, t: f64) -> Result<(DMatrix<C>, DMatrix<C>)> {
    Ok(NormalModes::new(spec)?.uv(t))
}
