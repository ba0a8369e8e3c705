//! Reduced characteristic-function map of the system modes.
//!
//! With a Gaussian, unbiased reservoir the reduced symmetric-ordered
//! characteristic function evolves as
//!
//! ```text
//! χ_S(β, t) = χ_S(β'(t), 0) · exp(−Σ A_kj β_k β_j* + ½ Σ B_kj β_k β_j + c.c.)
//! β'_j = Σ_k (U_kj β_k − V_kj* β_k*)      (k, j over system modes)
//! ```
//!
//! where `A = A⁽⁰⁾ + A⁽ᵗʰ⁾` and `B = B⁽⁰⁾ + B⁽ᵗʰ⁾` collect the reservoir
//! fluctuations. Sums below run over reservoir columns `m, n`:
//!
//! ```text
//! A⁽⁰⁾_kj  = ½ Σ_m (U_km U_jm* + V_km V_jm*)
//! B⁽⁰⁾_kj  = ½ Σ_m (U_km V_jm + V_km U_jm)
//! A⁽ᵗʰ⁾_kj = Σ_mn [N_mn (U_km U_jn* + V_kn V_jm*) + S_mn V_km U_jn* + S_mn* U_km V_jn*]
//! B⁽ᵗʰ⁾_kj = Σ_mn [N_mn (U_km V_jn + U_jm V_kn)   + S_mn V_km V_jn  + S_mn* U_km U_jn]
//! ```
//!
//! with `N_mn = ⟨a_m† a_n⟩₀` and `S_mn = ⟨a_m a_n⟩₀`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{covariance_from_moments, covariance_physicality};
use crate::propagator::UVTrajectory;

/// Initial second moments of an unbiased Gaussian reservoir.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirMoments {
    /// `⟨a_m† a_n⟩₀`.
    pub occupation: DMatrix<C>,
    /// `⟨a_m a_n⟩₀`.
    pub anomalous: DMatrix<C>,
}

/// Bose–Einstein occupation at angular frequency `omega` and temperature `temperature` (k_B = 1).
pub fn bose_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        0.0
    } else {
        1.0 / (omega / temperature).exp_m1()
    }
}

impl ReservoirMoments {
    pub fn n_modes(&self) -> usize {
        self.occupation.nrows()
    }

    pub fn zero_temperature(n: usize) -> Self {
        Self { occupation: DMatrix::zeros(n, n), anomalous: DMatrix::zeros(n, n) }
    }

    pub fn thermal_occupations(n_bar: &[f64]) -> Self {
        let n = n_bar.len();
        let mut occupation = DMatrix::zeros(n, n);
        for (k, &x) in n_bar.iter().enumerate() {
            occupation[(k, k)] = C::new(x, 0.0);
        }
        Self { occupation, anomalous: DMatrix::zeros(n, n) }
    }

    pub fn thermal(frequencies: &[f64], temperature: f64) -> Self {
        let n_bar: Vec<f64> = frequencies.iter().map(|&w| bose_occupation(w, temperature)).collect();
        Self::thermal_occupations(&n_bar)
    }

    /// Independently squeezed thermal modes, all with squeezing `r e^{iφ}`.
    pub fn squeezed(n_bar: &[f64], r: f64, phi: f64) -> Self {
        let mut out = Self::thermal_occupations(n_bar);
        for (k, &x) in n_bar.iter().enumerate() {
            out.occupation[(k, k)] = C::new(x * (2.0 * r).cosh() + r.sinh().powi(2), 0.0);
            out.anomalous[(k, k)] = -C::from_polar(0.5 * (2.0 * r).sinh() * (2.0 * x + 1.0), phi);
        }
        out
    }

    /// Quadrature covariance of the reservoir, same convention as
    /// [`crate::gaussian::GaussianState`].
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        let sym = &self.occupation + DMatrix::<C>::identity(n, n) * C::new(0.5, 0.0);
        covariance_from_moments(&sym, &self.anomalous)
    }

    pub fn is_zero(&self) -> bool {
        self.occupation.iter().chain(self.anomalous.iter()).all(|z| *z == C::new(0.0, 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_modes();
        if self.occupation.shape() != (n, n) || self.anomalous.shape() != (n, n) {
            return Err(Error::ShapeMismatch("reservoir moment matrices must be square and equal".into()));
        }
        let scale = self.occupation.iter().chain(self.anomalous.iter()).map(|z| z.norm()).fold(1.0, f64::max);
        for k in 0..n {
            if self.occupation[(k, k)].re < 0.0 {
                return Err(Error::UnphysicalMoments(format!("negative occupation on mode {k}")));
            }
            for j in 0..n {
                if (self.occupation[(k, j)] - self.occupation[(j, k)].conj()).norm() > 1e-12 * scale {
                    return Err(Error::UnphysicalMoments(format!("occupation not Hermitian at ({k}, {j})")));
                }
                if (self.anomalous[(k, j)] - self.anomalous[(j, k)]).norm() > 1e-12 * scale {
                    return Err(Error::UnphysicalMoments(format!("anomalous moments not symmetric at ({k}, {j})")));
                }
            }
        }
        let phys = covariance_physicality(&self.covariance());
        if !phys.physical {
            return Err(Error::UnphysicalMoments(format!("uncertainty bound violated (margin {})", phys.margin)));
        }
        Ok(())
    }
}

/// Time series of the noise functions, split into zero-point and reservoir-state parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseKernels {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub a0: Vec<DMatrix<C>>,
    #[serde(skip)]
    pub b0: Vec<DMatrix<C>>,
    #[serde(skip)]
    pub ath: Vec<DMatrix<C>>,
    #[serde(skip)]
    pub bth: Vec<DMatrix<C>>,
}

impl NoiseKernels {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn a(&self, i: usize) -> DMatrix<C> {
        &self.a0[i] + &self.ath[i]
    }

    pub fn b(&self, i: usize) -> DMatrix<C> {
        &self.b0[i] + &self.bth[i]
    }

    /// Largest `|A − A†|` entry over the grid.
    pub fn hermiticity_defect(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let a = self.a(i);
                (&a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Zero-point bilinear: left factors carry the first (k) index, right
/// factors the second (j). Derivatives follow by the product rule.
fn zero_point_pair(ul: &DMatrix<C>, vl: &DMatrix<C>, ur: &DMatrix<C>, vr: &DMatrix<C>) -> (DMatrix<C>, DMatrix<C>) {
    let half = C::new(0.5, 0.0);
    (
        (ul * ur.adjoint() + vl * vr.adjoint()) * half,
        (ul * vr.transpose() + vl * ur.transpose()) * half,
    )
}

fn thermal_pair(
    ul: &DMatrix<C>,
    vl: &DMatrix<C>,
    ur: &DMatrix<C>,
    vr: &DMatrix<C>,
    mom: &ReservoirMoments,
) -> (DMatrix<C>, DMatrix<C>) {
    let n = &mom.occupation;
    let s = &mom.anomalous;
    let sc = s.map(|z| z.conj());
    let nt = n.transpose();
    let a = ul * n * ur.adjoint() + vl * &nt * vr.adjoint() + vl * s * ur.adjoint() + ul * &sc * vr.adjoint();
    let b = ul * n * vr.transpose() + vl * &nt * ur.transpose() + vl * s * vr.transpose() + ul * &sc * ur.transpose();
    (a, b)
}

/// Noise functions and their time derivatives from reservoir-column blocks
/// and their derivatives.
pub(crate) struct NoisePoint {
    pub a: DMatrix<C>,
    pub b: DMatrix<C>,
    pub da: DMatrix<C>,
    pub db: DMatrix<C>,
}

pub(crate) fn noise_with_derivative(
    u: &DMatrix<C>,
    v: &DMatrix<C>,
    du: &DMatrix<C>,
    dv: &DMatrix<C>,
    mom: &ReservoirMoments,
) -> NoisePoint {
    let (a0, b0) = zero_point_pair(u, v, u, v);
    let (a1, b1) = zero_point_pair(du, dv, u, v);
    let (a2, b2) = zero_point_pair(u, v, du, dv);
    let mut pt = NoisePoint { a: a0, b: b0, da: a1 + a2, db: b1 + b2 };
    if !mom.is_zero() {
        let (a0, b0) = thermal_pair(u, v, u, v, mom);
        let (a1, b1) = thermal_pair(du, dv, u, v, mom);
        let (a2, b2) = thermal_pair(u, v, du, dv, mom);
        pt.a += a0;
        pt.b += b0;
        pt.da += a1 + a2;
        pt.db += b1 + b2;
    }
    pt
}

fn check_reservoir(uv: &UVTrajectory, n_reservoir: Option<usize>) -> Result<()> {
    uv.check_system_rows()?;
    if let Some(r) = n_reservoir {
        if uv.n_modes() != uv.n_system + r {
            return Err(Error::ShapeMismatch(format!(
                "trajectory has {} reservoir columns, moments describe {r} modes",
                uv.n_modes() - uv.n_system
            )));
        }
    }
    Ok(())
}

/// `(A, B)` series over the grid.
pub type NoiseSeries = (Vec<DMatrix<C>>, Vec<DMatrix<C>>);

/// `(A⁽⁰⁾(t), B⁽⁰⁾(t))` on the trajectory grid.
pub fn noise_zero_point(uv: &UVTrajectory) -> Result<NoiseSeries> {
    check_reservoir(uv, None)?;
    Ok((0..uv.len())
        .into_par_iter()
        .map(|i| {
            let (u, v) = uv.reservoir_block(i);
            zero_point_pair(&u, &v, &u, &v)
        })
        .unzip())
}

/// `(A⁽ᵗʰ⁾(t), B⁽ᵗʰ⁾(t))` on the trajectory grid.
pub fn noise_thermal(uv: &UVTrajectory, moments: &ReservoirMoments) -> Result<NoiseSeries> {
    check_reservoir(uv, Some(moments.n_modes()))?;
    moments.validate()?;
    let m = uv.n_system;
    if moments.is_zero() {
        return Ok((vec![DMatrix::zeros(m, m); uv.len()], vec![DMatrix::zeros(m, m); uv.len()]));
    }
    Ok((0..uv.len())
        .into_par_iter()
        .map(|i| {
            let (u, v) = uv.reservoir_block(i);
            thermal_pair(&u, &v, &u, &v, moments)
        })
        .unzip())
}

/// Both parts of the noise.
pub fn noise_kernels(uv: &UVTrajectory, moments: &ReservoirMoments) -> Result<NoiseKernels> {
    let (ath, bth) = noise_thermal(uv, moments)?;
    let (a0, b0) = noise_zero_point(uv)?;
    Ok(NoiseKernels { times: uv.times.clone(), a0, b0, ath, bth })
}

/// Reduced characteristic function at grid index `i`, given the initial
/// system characteristic function `chi0`.
pub fn reduced_char_fn<F>(beta: &[C], i: usize, chi0: F, uv: &UVTrajectory, kernels: &NoiseKernels) -> Result<C>
where
    F: Fn(&[C]) -> C,
{
    let m = uv.n_system;
    if beta.len() != m {
        return Err(Error::ShapeMismatch(format!("β has {} entries for {m} system modes", beta.len())));
    }
    let (u, v) = uv.system_block(i);
    let mapped: Vec<C> = (0..m)
        .map(|j| (0..m).map(|k| u[(k, j)] * beta[k] - v[(k, j)].conj() * beta[k].conj()).sum())
        .collect();
    let a = kernels.a(i);
    let b = kernels.b(i);
    let mut e = C::new(0.0, 0.0);
    for k in 0..m {
        for j in 0..m {
            e -= a[(k, j)] * beta[k] * beta[j].conj();
            let q = 0.5 * b[(k, j)] * beta[k] * beta[j];
            e += q + q.conj();
        }
    }
    Ok(chi0(&mapped) * e.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianState;
    use crate::network::RenormalizedNetwork;
    use crate::ode::OdeOptions;
    use crate::propagator::{evolve_uv, PropagationMode, RowSelection};

    fn traj(mode: PropagationMode) -> UVTrajectory {
        let net = RenormalizedNetwork::star(1.0, &[0.8, 1.4], &[0.2, 0.15]);
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        evolve_uv(&net, &times, RowSelection::SystemOnly, mode, &OdeOptions::with_tolerance(1e-11)).unwrap()
    }

    #[test]
    fn vanish_at_start() {
        let uv = traj(PropagationMode::Full);
        let k = noise_kernels(&uv, &ReservoirMoments::thermal_occupations(&[1.5, 0.5])).unwrap();
        assert!(k.a(0).iter().chain(k.b(0).iter()).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn zero_temperature_has_no_thermal_part() {
        let uv = traj(PropagationMode::Full);
        let (a, b) = noise_thermal(&uv, &ReservoirMoments::zero_temperature(2)).unwrap();
        assert!(a.iter().chain(&b).all(|m| m.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn rwa_has_no_anomalous_noise() {
        let uv = traj(PropagationMode::Rwa);
        let (_, b0) = noise_zero_point(&uv).unwrap();
        assert!(b0.iter().all(|m| m.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn squeezed_moments_are_physical_and_pure() {
        let m = ReservoirMoments::squeezed(&[0.0], 0.4, 0.3);
        m.validate().unwrap();
        assert!((m.covariance().determinant() - 0.25).abs() < 1e-12);
        let bad = ReservoirMoments { anomalous: DMatrix::from_element(1, 1, C::new(1.0, 0.0)), ..ReservoirMoments::zero_temperature(1) };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mismatched_moments_rejected() {
        let uv = traj(PropagationMode::Full);
        assert!(matches!(noise_thermal(&uv, &ReservoirMoments::zero_temperature(3)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn char_fn_normalised_and_identity_at_start() {
        let uv = traj(PropagationMode::Full);
        let k = noise_kernels(&uv, &ReservoirMoments::thermal_occupations(&[0.3, 0.7])).unwrap();
        let s = GaussianState::coherent(&[C::new(0.4, -0.2)]);
        let chi = |b: &[C]| s.char_fn(b);
        assert_eq!(reduced_char_fn(&[C::new(0.0, 0.0)], 7, chi, &uv, &k).unwrap(), C::new(1.0, 0.0));
        let b = [C::new(0.3, 0.5)];
        assert!((reduced_char_fn(&b, 0, chi, &uv, &k).unwrap() - s.char_fn(&b)).norm() < 1e-15);
    }

    #[test]
    fn rwa_vacuum_char_fn_is_stationary() {
        let uv = traj(PropagationMode::Rwa);
        let k = noise_kernels(&uv, &ReservoirMoments::zero_temperature(2)).unwrap();
        let vac = GaussianState::vacuum(1);
        let b = [C::new(0.6, -0.9)];
        for i in 0..uv.len() {
            let chi = reduced_char_fn(&b, i, |x| vac.char_fn(x), &uv, &k).unwrap();
            assert!((chi - C::new((-0.5 * b[0].norm_sqr()).exp(), 0.0)).norm() < 1e-9);
        }
    }
}
