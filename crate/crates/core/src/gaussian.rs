//! Gaussian system states as phase-space data.
//!
//! Quadratures are `x = (a + a†)/√2`, `p = (a − a†)/(i√2)`, ordered
//! `(x₁, p₁, x₂, p₂, …)`, with the symplectic form `Ω = ⊕ [[0, 1], [−1, 0]]`.
//! The covariance is symmetric-ordered, `σ_ij = ½⟨{δr_i, δr_j}⟩`, so the
//! vacuum is `½𝟙` and physical states satisfy `σ + iΩ/2 ⪰ 0`.
//!
//! The complex moments used alongside are
//! `N_kj = ½⟨{δa_k†, δa_j}⟩` (Hermitian) and `S_kj = ⟨δa_k δa_j⟩` (symmetric).
//! The inhomogeneous noise `(A, B)` of the reduced map adds `A` to `N` and
//! `B*` to `S`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::min_eigenvalue;
use crate::propagator::UVTrajectory;
use crate::reduced::NoiseKernels;

/// Margin below which a covariance is reported unphysical.
pub const PHYSICALITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    /// `⟨a_k⟩`; the centre of the wavepacket.
    pub mean: DVector<C>,
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Physicality {
    pub physical: bool,
    /// Smallest eigenvalue of `σ + iΩ/2`.
    pub margin: f64,
}

/// Symplectic form on `n` modes.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        o[(2 * k, 2 * k + 1)] = 1.0;
        o[(2 * k + 1, 2 * k)] = -1.0;
    }
    o
}

/// Smallest eigenvalue of the Hermitian matrix `re + i·im`.
pub(crate) fn hermitian_min_eigenvalue(re: &DMatrix<f64>, im: &DMatrix<f64>) -> f64 {
    let n = re.nrows();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(re);
    big.view_mut((n, n), (n, n)).copy_from(re);
    big.view_mut((0, n), (n, n)).copy_from(&(-im));
    big.view_mut((n, 0), (n, n)).copy_from(im);
    min_eigenvalue(&big)
}

/// Quadrature covariance from complex moments `(N, S)`.
pub fn covariance_from_moments(n_sym: &DMatrix<C>, s: &DMatrix<C>) -> DMatrix<f64> {
    let m = n_sym.nrows();
    let mut cov = DMatrix::zeros(2 * m, 2 * m);
    for k in 0..m {
        for j in 0..m {
            let nn = n_sym[(k, j)];
            let ss = s[(k, j)];
            cov[(2 * k, 2 * j)] = ss.re + nn.re;
            cov[(2 * k + 1, 2 * j + 1)] = -ss.re + nn.re;
            cov[(2 * k, 2 * j + 1)] = ss.im + nn.im;
            cov[(2 * k + 1, 2 * j)] = ss.im - nn.im;
        }
    }
    cov
}

/// Complex moments `(N, S)` from a quadrature covariance.
pub fn moments_from_covariance(cov: &DMatrix<f64>) -> (DMatrix<C>, DMatrix<C>) {
    let m = cov.nrows() / 2;
    let mut n_sym = DMatrix::zeros(m, m);
    let mut s = DMatrix::zeros(m, m);
    for k in 0..m {
        for j in 0..m {
            let xx = cov[(2 * k, 2 * j)];
            let pp = cov[(2 * k + 1, 2 * j + 1)];
            let xp = cov[(2 * k, 2 * j + 1)];
            let px = cov[(2 * k + 1, 2 * j)];
            n_sym[(k, j)] = C::new(0.5 * (xx + pp), 0.5 * (xp - px));
            s[(k, j)] = C::new(0.5 * (xx - pp), 0.5 * (xp + px));
        }
    }
    (n_sym, s)
}

/// Quadrature form `T` of the Heisenberg map generated by propagator blocks
/// `(U, V)`: `r(t) = T r(0)`.
pub fn quadrature_map(u: &DMatrix<C>, v: &DMatrix<C>) -> DMatrix<f64> {
    let (rows, cols) = u.shape();
    let mut t = DMatrix::zeros(2 * rows, 2 * cols);
    for k in 0..rows {
        for j in 0..cols {
            let p = u[(k, j)].conj();
            let q = v[(k, j)].conj();
            let plus = p + q;
            let minus = p - q;
            t[(2 * k, 2 * j)] = plus.re;
            t[(2 * k, 2 * j + 1)] = -minus.im;
            t[(2 * k + 1, 2 * j)] = plus.im;
            t[(2 * k + 1, 2 * j + 1)] = minus.re;
        }
    }
    t
}

/// Inverse of [`quadrature_map`].
pub fn bogoliubov_from_quadrature(t: &DMatrix<f64>) -> (DMatrix<C>, DMatrix<C>) {
    let rows = t.nrows() / 2;
    let cols = t.ncols() / 2;
    let mut u = DMatrix::zeros(rows, cols);
    let mut v = DMatrix::zeros(rows, cols);
    for k in 0..rows {
        for j in 0..cols {
            let xx = t[(2 * k, 2 * j)];
            let xp = t[(2 * k, 2 * j + 1)];
            let px = t[(2 * k + 1, 2 * j)];
            let pp = t[(2 * k + 1, 2 * j + 1)];
            let p = C::new(0.5 * (xx + pp), 0.5 * (px - xp));
            let q = C::new(0.5 * (xx - pp), 0.5 * (px + xp));
            u[(k, j)] = p.conj();
            v[(k, j)] = q.conj();
        }
    }
    (u, v)
}

/// Quadrature covariance contributed by the noise functions `(A, B)`.
pub fn noise_covariance(a: &DMatrix<C>, b: &DMatrix<C>) -> DMatrix<f64> {
    covariance_from_moments(a, &b.map(|z| z.conj()))
}

impl GaussianState {
    pub fn n_modes(&self) -> usize {
        self.mean.len()
    }

    pub fn vacuum(n: usize) -> Self {
        Self { mean: DVector::zeros(n), covariance: DMatrix::identity(2 * n, 2 * n) * 0.5 }
    }

    pub fn coherent(alpha: &[C]) -> Self {
        Self { mean: DVector::from_column_slice(alpha), ..Self::vacuum(alpha.len()) }
    }

    /// Product of displaced squeezed thermal states, one per mode:
    /// `D(α) S(r e^{iφ}) ρ_th(n̄) S† D†`, with `S(ζ) = exp(½(ζ* a² − ζ a†²))`.
    pub fn squeezed_thermal(modes: &[SingleModeGaussian]) -> Self {
        let n = modes.len();
        let mut n_sym = DMatrix::zeros(n, n);
        let mut s = DMatrix::zeros(n, n);
        for (k, m) in modes.iter().enumerate() {
            let half = m.n_bar + 0.5;
            n_sym[(k, k)] = C::new(half * (2.0 * m.squeeze).cosh(), 0.0);
            s[(k, k)] = -C::from_polar(half * (2.0 * m.squeeze).sinh(), m.squeeze_phase);
        }
        Self {
            mean: DVector::from_iterator(n, modes.iter().map(|m| m.displacement)),
            covariance: covariance_from_moments(&n_sym, &s),
        }
    }

    pub fn moments(&self) -> (DMatrix<C>, DMatrix<C>) {
        moments_from_covariance(&self.covariance)
    }

    /// Symmetric-ordered characteristic function `⟨exp(Σ β_k a_k† − β_k* a_k)⟩`.
    pub fn char_fn(&self, beta: &[C]) -> C {
        let (n_sym, s) = self.moments();
        let mut e = C::new(0.0, 0.0);
        for k in 0..beta.len() {
            e += beta[k] * self.mean[k].conj() - beta[k].conj() * self.mean[k];
            for j in 0..beta.len() {
                e -= n_sym[(k, j)] * beta[k] * beta[j].conj();
                e += 0.5 * (s[(k, j)].conj() * beta[k] * beta[j] + s[(k, j)] * (beta[k] * beta[j]).conj());
            }
        }
        e.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleModeGaussian {
    pub displacement: C,
    pub n_bar: f64,
    pub squeeze: f64,
    pub squeeze_phase: f64,
}

impl Default for SingleModeGaussian {
    fn default() -> Self {
        Self { displacement: C::new(0.0, 0.0), n_bar: 0.0, squeeze: 0.0, squeeze_phase: 0.0 }
    }
}

/// Robertson–Schrödinger check `σ + iΩ/2 ⪰ 0`.
pub fn physicality_check(state: &GaussianState) -> Physicality {
    covariance_physicality(&state.covariance)
}

pub fn covariance_physicality(cov: &DMatrix<f64>) -> Physicality {
    let n = cov.nrows() / 2;
    let sym = (cov + cov.transpose()) * 0.5;
    let margin = hermitian_min_eigenvalue(&sym, &(symplectic_form(n) * 0.5));
    Physicality { physical: margin >= -PHYSICALITY_TOLERANCE, margin }
}

/// Classical trajectory of the centre: `α(t) = U* α₀ + V* α₀*` on the system block.
pub fn evolve_center(mean0: &DVector<C>, u: &DMatrix<C>, v: &DMatrix<C>) -> Result<DVector<C>> {
    if u.shape() != (mean0.len(), mean0.len()) || v.shape() != u.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{}-mode mean with {:?} propagator block",
            mean0.len(),
            u.shape()
        )));
    }
    Ok(u.map(|z| z.conj()) * mean0 + v.map(|z| z.conj()) * mean0.map(|z| z.conj()))
}

/// Reduced state at grid index `i`: `σ(t) = T σ₀ Tᵀ + Σ_noise`.
pub fn evolve_state(
    state0: &GaussianState,
    uv: &UVTrajectory,
    kernels: &NoiseKernels,
    i: usize,
) -> Result<GaussianState> {
    let phys = physicality_check(state0);
    if !phys.physical {
        return Err(Error::UnphysicalInput(phys.margin));
    }
    evolve_state_unchecked(state0, uv, kernels, i)
}

fn evolve_state_unchecked(
    state0: &GaussianState,
    uv: &UVTrajectory,
    kernels: &NoiseKernels,
    i: usize,
) -> Result<GaussianState> {
    uv.check_system_rows()?;
    if state0.n_modes() != uv.n_system {
        return Err(Error::ShapeMismatch(format!(
            "{}-mode state for {} system modes",
            state0.n_modes(),
            uv.n_system
        )));
    }
    let (u, v) = uv.system_block(i);
    let mean = evolve_center(&state0.mean, &u, &v)?;
    let t = quadrature_map(&u, &v);
    let covariance = &t * &state0.covariance * t.transpose() + noise_covariance(&kernels.a(i), &kernels.b(i));
    Ok(GaussianState { mean, covariance })
}

/// [`evolve_state`] on every grid point.
pub fn evolve_state_series(
    state0: &GaussianState,
    uv: &UVTrajectory,
    kernels: &NoiseKernels,
) -> Result<Vec<GaussianState>> {
    let phys = physicality_check(state0);
    if !phys.physical {
        return Err(Error::UnphysicalInput(phys.margin));
    }
    (0..uv.len()).map(|i| evolve_state_unchecked(state0, uv, kernels, i)).collect()
}

/// Shape of the evolved vacuum over time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VacuumDistortion {
    pub times: Vec<f64>,
    /// Row-major covariance of the evolved vacuum at each time.
    pub covariances: Vec<Vec<f64>>,
    /// Whether `σ − ½𝟙 ⪰ 0`, i.e. the vacuum-shape P function is an ordinary
    /// (possibly singular-at-equality) non-negative distribution.
    pub regular_p: Vec<bool>,
    /// Smallest eigenvalue of `σ − ½𝟙`.
    pub p_margin: Vec<f64>,
    /// Largest entry of `|σ − ½𝟙|`.
    pub deviation: Vec<f64>,
}

impl VacuumDistortion {
    pub fn covariance(&self, i: usize) -> DMatrix<f64> {
        let n = (self.covariances[i].len() as f64).sqrt() as usize;
        DMatrix::from_row_slice(n, n, &self.covariances[i])
    }

    pub fn max_deviation(&self) -> f64 {
        self.deviation.iter().copied().fold(0.0, f64::max)
    }
}

pub fn vacuum_distortion(uv: &UVTrajectory, kernels: &NoiseKernels) -> Result<VacuumDistortion> {
    let m = uv.n_system;
    let vac = GaussianState::vacuum(m);
    let half = DMatrix::<f64>::identity(2 * m, 2 * m) * 0.5;
    let mut out = VacuumDistortion {
        times: uv.times.clone(),
        covariances: Vec::with_capacity(uv.len()),
        regular_p: Vec::with_capacity(uv.len()),
        p_margin: Vec::with_capacity(uv.len()),
        deviation: Vec::with_capacity(uv.len()),
    };
    for i in 0..uv.len() {
        let s = evolve_state_unchecked(&vac, uv, kernels, i)?;
        let diff = &s.covariance - &half;
        let sym = (&diff + diff.transpose()) * 0.5;
        let margin = min_eigenvalue(&sym);
        out.deviation.push(diff.abs().max());
        out.regular_p.push(margin >= -1e-12);
        out.p_margin.push(margin);
        out.covariances.push(s.covariance.transpose().iter().copied().collect());
    }
    Ok(out)
}
