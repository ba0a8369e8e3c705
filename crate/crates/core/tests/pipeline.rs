//! End-to-end checks of the worked examples against brute-force references.

mod common;

use common::*;
use exactdyn::gaussian::{evolve_center, evolve_state, GaussianState, SingleModeGaussian};
use exactdyn::kernel::{memory_kernel, KernelSpec};
use exactdyn::master::{extract_coefficients, markovianity_report, reintegrate_moments, Classification, MomentState};
use exactdyn::network::{renormalize, RenormalizedNetwork};
use exactdyn::ode::OdeOptions;
use exactdyn::propagator::{evolve_uv, PropagationMode, RowSelection};
use exactdyn::reduced::{noise_kernels, ReservoirMoments};
use exactdyn::spectral::{Discretization, SpectralFamily, SpectralPreset};
use nalgebra::DVector;
use num_complex::Complex64 as C;
use std::f64::consts::PI;

fn tight() -> OdeOptions {
    OdeOptions::with_tolerance(1e-12)
}

fn two_mode() -> RenormalizedNetwork {
    RenormalizedNetwork::star(1.0, &[1.2], &[0.25])
}

#[test]
fn ohmic_preset_round_trips_through_position_couplings() {
    let preset = SpectralPreset {
        family: SpectralFamily::Ohmic { kappa: 0.002, cutoff: 1.0 },
        discretization: Discretization { n_modes: 50, ..Default::default() },
    };
    let bath = preset.discretize().unwrap();
    let spec = bath.network_spec(1.0).unwrap();
    let net = renormalize(&spec).unwrap();
    for j in 0..50 {
        assert!((net.frequencies[j + 1] - bath.frequencies[j]).abs() < 1e-12);
        assert!((net.mode_couplings[(0, j + 1)] - bath.couplings[j]).abs() < 1e-12);
    }
}

#[test]
fn zero_point_and_thermal_noise_match_oracle() {
    let net = two_mode();
    let spec = net.to_network_spec(&[1.0, 1.0]).unwrap();
    let times = vec![0.0, 0.65, 1.3];
    let uv = evolve_uv(&net, &times, RowSelection::SystemOnly, PropagationMode::Full, &tight()).unwrap();
    let vac = GaussianState::vacuum(1);
    for res in [ReservoirMoments::zero_temperature(1), ReservoirMoments::thermal_occupations(&[1.5])] {
        let k = noise_kernels(&uv, &res).unwrap();
        let s = evolve_state(&vac, &uv, &k, 2).unwrap();
        let o = traced_oracle(&spec, &vac, &res, 1.3);
        assert!(max_abs(&(s.covariance - o.covariance)) < 1e-10);
    }
}

#[test]
fn center_matches_oracle() {
    let net = two_mode();
    let spec = net.to_network_spec(&[1.0, 1.0]).unwrap();
    let uv = evolve_uv(&net, &[0.0, 0.9], RowSelection::SystemOnly, PropagationMode::Full, &tight()).unwrap();
    let (u, v) = uv.system_block(1);
    let a = evolve_center(&DVector::from_element(1, C::new(1.0, 0.0)), &u, &v).unwrap();
    let o = traced_oracle(&spec, &GaussianState::coherent(&[C::new(1.0, 0.0)]), &ReservoirMoments::zero_temperature(1), 0.9);
    assert!((a[0] - o.mean[0]).norm() < 1e-10);
}

#[test]
fn free_center_keeps_modulus() {
    let net = RenormalizedNetwork::uncoupled(1, vec![1.0, 2.0]);
    let uv = evolve_uv(&net, &grid(5.0, 50), RowSelection::SystemOnly, PropagationMode::Full, &tight()).unwrap();
    for i in 0..uv.len() {
        let (u, v) = uv.system_block(i);
        let a = evolve_center(&DVector::from_element(1, C::new(1.0, 0.0)), &u, &v).unwrap();
        assert!((a[0] - C::from_polar(1.0, -uv.times[i])).norm() < 1e-10);
    }
}

#[test]
fn squeezed_input_three_modes_matches_oracle() {
    // 3 dB of squeezing
    let r = 0.3 * std::f64::consts::LN_10 / 2.0;
    let net = RenormalizedNetwork::star(1.0, &[0.9, 1.3], &[0.2, 0.15]);
    let spec = net.to_network_spec(&[1.0; 3]).unwrap();
    let uv = evolve_uv(&net, &[0.0, 1.0, 2.0], RowSelection::SystemOnly, PropagationMode::Full, &tight()).unwrap();
    let res = ReservoirMoments::zero_temperature(2);
    let k = noise_kernels(&uv, &res).unwrap();
    let s0 = GaussianState::squeezed_thermal(&[SingleModeGaussian { squeeze: r, squeeze_phase: 0.5, ..Default::default() }]);
    assert_eq!(evolve_state(&s0, &uv, &k, 0).unwrap(), s0);
    let s = evolve_state(&s0, &uv, &k, 2).unwrap();
    let o = traced_oracle(&spec, &s0, &res, 2.0);
    assert!(max_abs(&(s.covariance - o.covariance)) < 1e-8);
}

#[test]
fn unphysical_initial_state_rejected() {
    let net = two_mode();
    let uv = evolve_uv(&net, &[0.0, 1.0], RowSelection::SystemOnly, PropagationMode::Full, &tight()).unwrap();
    let k = noise_kernels(&uv, &ReservoirMoments::zero_temperature(1)).unwrap();
    let bad = GaussianState { mean: DVector::zeros(1), covariance: nalgebra::DMatrix::identity(2, 2) * 0.4 };
    assert!(matches!(evolve_state(&bad, &uv, &k, 1), Err(exactdyn::Error::UnphysicalInput(_))));
}

#[test]
fn free_oscillator_coefficients() {
    let net = RenormalizedNetwork::star(1.4, &[1.0, 2.0], &[0.0, 0.0]);
    let times = grid(10.0, 100);
    let uv = evolve_uv(&net, &times, RowSelection::SystemOnly, PropagationMode::Full, &tight()).unwrap();
    let c = extract_coefficients(&uv, &net, &ReservoirMoments::thermal_occupations(&[1.0, 0.5])).unwrap();
    for i in 0..c.len() {
        assert!((c.omega[i] - 1.4).abs() < 1e-9);
        assert!(c.gamma1[i].abs() < 1e-12 && c.gamma2[i].abs() < 1e-12);
        assert!(c.xi[i].norm() < 1e-12 && c.eta[i].norm() < 1e-12);
    }
}

#[test]
fn two_mode_round_trip_from_vacuum() {
    let net = two_mode();
    let times = grid(10.0, 4000);
    let uv = evolve_uv(&net, &times, RowSelection::SystemOnly, PropagationMode::Full, &tight()).unwrap();
    let res = ReservoirMoments::zero_temperature(1);
    let k = noise_kernels(&uv, &res).unwrap();
    let c = extract_coefficients(&uv, &net, &res).unwrap();
    let vac = GaussianState::vacuum(1);
    for (i, s) in reintegrate_moments(&c, MomentState::from_state(&vac).unwrap()).unwrap() {
        let e = MomentState::from_state(&evolve_state(&vac, &uv, &k, i).unwrap()).unwrap();
        assert!((s.n - e.n).abs() < 1e-6 && (s.m - e.m).norm() < 1e-6, "t={}", times[i]);
    }
}

#[test]
fn multimode_coefficients_rejected() {
    let net = RenormalizedNetwork::uncoupled(2, vec![1.0, 1.0, 1.0]);
    let uv = evolve_uv(&net, &[0.0, 1.0], RowSelection::SystemOnly, PropagationMode::Full, &tight()).unwrap();
    assert!(matches!(
        extract_coefficients(&uv, &net, &ReservoirMoments::zero_temperature(1)),
        Err(exactdyn::Error::MultiModeUnsupported(2))
    ));
}

#[test]
fn ohmic_kernel_converges_at_second_order() {
    let fam = SpectralFamily::Ohmic { kappa: 0.05, cutoff: 1.0 };
    let kernel = |n| {
        let p = SpectralPreset { family: fam, discretization: Discretization { n_modes: n, ..Default::default() } };
        let r = p.discretize().unwrap();
        KernelSpec::Discrete { system_frequency: 1.0, frequencies: r.frequencies, couplings: r.couplings }
    };
    let reference = kernel(16000);
    let err = |k: &KernelSpec| {
        (0..=100).map(|i| (memory_kernel(k, i as f64 * 0.05) - memory_kernel(&reference, i as f64 * 0.05)).abs()).fold(0.0, f64::max)
    };
    let (e100, e1000) = (err(&kernel(100)), err(&kernel(1000)));
    let slope = (e100 / e1000).log10();
    assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn strong_markovianity_is_refinement_stable() {
    let net = RenormalizedNetwork::star(1.0, &[1.0], &[0.3]);
    let res = ReservoirMoments::zero_temperature(1);
    let classify = |n| {
        let uv = evolve_uv(&net, &grid(2.0 * PI, n), RowSelection::SystemOnly, PropagationMode::Full, &tight()).unwrap();
        markovianity_report(&extract_coefficients(&uv, &net, &res).unwrap(), false).classification
    };
    assert_eq!(classify(200), Classification::NonMarkovian);
    assert_eq!(classify(400), Classification::NonMarkovian);
}

fn weak_ohmic() -> (RenormalizedNetwork, usize) {
    let preset = SpectralPreset { family: SpectralFamily::Ohmic { kappa: 1e-4, cutoff: 1.0 }, discretization: Discretization::default() };
    let bath = preset.discretize().unwrap();
    (bath.network(1.0), bath.n_modes())
}

#[test]
fn weak_ohmic_rwa_stays_markovian_under_refinement() {
    let (net, n) = weak_ohmic();
    let res = ReservoirMoments::zero_temperature(n);
    for pts in [250, 500] {
        let uv = evolve_uv(&net, &grid(10.0, pts), RowSelection::SystemOnly, PropagationMode::Rwa, &tight()).unwrap();
        let r = markovianity_report(&extract_coefficients(&uv, &net, &res).unwrap(), true);
        assert!(r.first_violation.is_none());
        assert!(r.disagreements.is_empty());
    }
}

/// Regression: with counter-rotating terms kept, the exact weak-coupling
/// dynamics has a small negative `γ₁γ₂ + γ₂² − |η|²` at early times, of the
/// order of the rates squared. This is a property of the model, not noise.
#[test]
fn weak_ohmic_full_dynamics_is_not_divisible() {
    let (net, n) = weak_ohmic();
    let res = ReservoirMoments::zero_temperature(n);
    let uv = evolve_uv(&net, &grid(10.0, 500), RowSelection::SystemOnly, PropagationMode::Full, &tight()).unwrap();
    let c = extract_coefficients(&uv, &net, &res).unwrap();
    let r = markovianity_report(&c, false);
    let worst = r.ineq2.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = c.gamma1.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    assert_eq!(r.classification, Classification::NonMarkovian);
    assert!(worst < -1e-10 && worst.abs() < scale * scale, "ineq2 {worst:e}, rate scale {scale:e}");
}
