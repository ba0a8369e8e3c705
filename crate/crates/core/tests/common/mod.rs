//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use exactdyn::gaussian::GaussianState;
use exactdyn::network::{validate, NetworkSpec, RenormalizedNetwork};
use exactdyn::propagator::NormalModes;
use exactdyn::reduced::ReservoirMoments;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn grid(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub fn max_abs_c(m: &DMatrix<C>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.norm()))
}

/// Random physical star with `ω₁ = 1`: each `g_j ≤ g_max`, rescaled so the
/// potential stays comfortably positive and the bare frequencies exist.
pub fn random_star(rng: &mut ChaCha8Rng, n_max: usize, g_max: f64) -> RenormalizedNetwork {
    let n = rng.gen_range(1..=n_max);
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.8..2.0)).collect();
    let mut g: Vec<f64> = w.iter().map(|w: &f64| rng.gen_range(0.0..g_max.min(0.45 * w.powf(1.5)))).collect();
    let load: f64 = g.iter().zip(&w).map(|(g, w)| 4.0 * g * g / w).sum();
    if load > 0.7 {
        let s = (0.7 / load).sqrt();
        g.iter_mut().for_each(|x| *x *= s);
    }
    // bare system frequency: 1 − Σ 2 g_j √ω_j > 0
    let shift: f64 = g.iter().zip(&w).map(|(g, w)| 2.0 * g * w.sqrt()).sum();
    if shift > 0.8 {
        g.iter_mut().for_each(|x| *x *= 0.8 / shift);
    }
    RenormalizedNetwork::star(1.0, &w, &g)
}

/// Random physical position-coupled network with dense couplings.
pub fn random_spec(rng: &mut ChaCha8Rng, n_system: usize, n_reservoir: usize, strength: f64) -> NetworkSpec {
    let n = n_system + n_reservoir;
    loop {
        let masses: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let bare: Vec<f64> = (0..n).map(|_| rng.gen_range(0.6..1.8)).collect();
        let mut c = vec![vec![0.0; n]; n];
        for k in 0..n {
            for j in k + 1..n {
                let x = rng.gen_range(-strength..strength);
                c[k][j] = x;
                c[j][k] = x;
            }
        }
        let spec = NetworkSpec { n_system, masses, bare_frequencies: bare, couplings: c };
        if validate(&spec).is_physical() {
            return spec;
        }
    }
}

/// Random physical single-mode Gaussian state.
pub fn random_state(rng: &mut ChaCha8Rng) -> GaussianState {
    GaussianState::squeezed_thermal(&[exactdyn::gaussian::SingleModeGaussian {
        displacement: C::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)),
        n_bar: rng.gen_range(0.0..1.0),
        squeeze: rng.gen_range(0.0..0.6),
        squeeze_phase: rng.gen_range(-3.0..3.0),
    }])
}

/// Quadrature mean vector `(√2 Re α, √2 Im α, …)`.
pub fn quadrature_mean(alpha: &DVector<C>) -> DVector<f64> {
    let s = std::f64::consts::SQRT_2;
    DVector::from_iterator(2 * alpha.len(), alpha.iter().flat_map(|a| [s * a.re, s * a.im]))
}

pub fn complex_mean(r: &DVector<f64>) -> DVector<C> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_iterator(r.len() / 2, (0..r.len() / 2).map(|k| C::new(s * r[2 * k], s * r[2 * k + 1])))
}

/// Full-universe Gaussian propagation by exact diagonalization, traced onto
/// the system modes.
pub fn traced_oracle(spec: &NetworkSpec, system: &GaussianState, reservoir: &ReservoirMoments, t: f64) -> GaussianState {
    let m = spec.n_system;
    let n = spec.n_modes();
    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    cov.view_mut((0, 0), (2 * m, 2 * m)).copy_from(&system.covariance);
    cov.view_mut((2 * m, 2 * m), (2 * (n - m), 2 * (n - m))).copy_from(&reservoir.covariance());
    let mut mean = DVector::zeros(2 * n);
    mean.rows_mut(0, 2 * m).copy_from(&quadrature_mean(&system.mean));
    let tmap = NormalModes::new(spec).unwrap().quadrature_map(t);
    let cov_t = &tmap * cov * tmap.transpose();
    let mean_t = &tmap * mean;
    GaussianState {
        mean: complex_mean(&mean_t.rows(0, 2 * m).into_owned()),
        covariance: cov_t.view((0, 0), (2 * m, 2 * m)).into_owned(),
    }
}

/// Universe energy `⟨H⟩` in the mode picture from quadrature moments.
pub fn universe_energy(net: &RenormalizedNetwork, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = net.n_modes();
    let second = |a: usize, b: usize| cov[(a, b)] + mean[a] * mean[b];
    let mut e = 0.0;
    for k in 0..n {
        e += 0.5 * net.frequencies[k] * (second(2 * k, 2 * k) + second(2 * k + 1, 2 * k + 1));
        for j in 0..n {
            e -= net.mode_couplings[(k, j)] * second(2 * k, 2 * j);
        }
    }
    e
}
