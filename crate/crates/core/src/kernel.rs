//! Single-mode memory-kernel path.
//!
//! For a star network the system row obeys, with `D = U₁ − V₁`,
//!
//! ```text
//! dU₁/dt =  iω₁ U₁ − 2i ∫₀ᵗ h(t − τ) D(τ) dτ
//! dV₁/dt = −iω₁ V₁ − 2i ∫₀ᵗ h(t − τ) D(τ) dτ
//! h(t)   = Σ_j g_j² sin(ω_j t)
//! ```
//!
//! and the reservoir entries of the same row follow from `D` alone:
//! `U_j = −i g_j ∫ e^{iω_j(t−τ)} D dτ`, `V_j = −i g_j ∫ e^{−iω_j(t−τ)} D dτ`.
//!
//! The Volterra pair is marched with trapezoidal product integration on a
//! uniform step. Because `h(0) = 0` the convolution at the new time only needs
//! past values, so each step is explicit after a 1×1 implicit solve for the
//! local rotation. Three step sizes are combined by Richardson extrapolation.

use num_complex::Complex64 as C;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::RenormalizedNetwork;
use crate::propagator::{check_grid, PropagationMode, UVTrajectory};
use crate::quad::composite;
use crate::spectral::SpectralPreset;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Discrete { system_frequency: f64, frequencies: Vec<f64>, couplings: Vec<f64> },
    Continuum { system_frequency: f64, preset: SpectralPreset },
}

impl KernelSpec {
    pub fn from_star(net: &RenormalizedNetwork) -> Result<Self> {
        if net.n_system != 1 {
            return Err(Error::MultiModeUnsupported(net.n_system));
        }
        let n = net.n_modes();
        for k in 1..n {
            for j in 1..n {
                if net.mode_couplings[(k, j)] != 0.0 {
                    return Err(Error::NonStarTopology(k, j));
                }
            }
        }
        Ok(Self::Discrete {
            system_frequency: net.frequencies[0],
            frequencies: net.frequencies[1..].to_vec(),
            couplings: (1..n).map(|j| net.mode_couplings[(0, j)]).collect(),
        })
    }

    pub fn system_frequency(&self) -> f64 {
        match self {
            Self::Discrete { system_frequency, .. } | Self::Continuum { system_frequency, .. } => *system_frequency,
        }
    }

    /// Discrete modes `(ω_j, g_j)`; continuum specs are binned first.
    pub fn modes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            Self::Discrete { frequencies, couplings, .. } => {
                if frequencies.len() != couplings.len() {
                    return Err(Error::ShapeMismatch("kernel frequencies and couplings differ in length".into()));
                }
                if let Some(j) = frequencies.iter().position(|w| !(*w > 0.0)) {
                    return Err(Error::InvalidNetwork(format!("reservoir frequency {j} is not positive")));
                }
                Ok((frequencies.clone(), couplings.clone()))
            }
            Self::Continuum { preset, .. } => {
                let r = preset.discretize()?;
                Ok((r.frequencies, r.couplings))
            }
        }
    }

    pub fn network(&self) -> Result<RenormalizedNetwork> {
        let (w, g) = self.modes()?;
        Ok(RenormalizedNetwork::star(self.system_frequency(), &w, &g))
    }
}

/// `h(t)`; for a continuum spec `∫ J(ω) sin(ωt) dω` over the band.
pub fn memory_kernel(kernel: &KernelSpec, t: f64) -> f64 {
    match kernel {
        KernelSpec::Discrete { frequencies, couplings, .. } => {
            frequencies.iter().zip(couplings).map(|(w, g)| g * g * (w * t).sin()).sum()
        }
        KernelSpec::Continuum { preset, .. } => {
            if let crate::spectral::SpectralFamily::SingleMode { coupling, frequency } = preset.family {
                return coupling * coupling * (frequency * t).sin();
            }
            let Ok((lo, hi)) = preset.band() else { return f64::NAN };
            let panels = (((hi - lo) * t.abs() / std::f64::consts::PI).ceil() as usize).max(64);
            composite(|w| preset.family.density(w) * (w * t).sin(), lo, hi, panels, 10)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    /// Largest step as a fraction of the fastest period scale `1/ω_max`.
    pub step_factor: f64,
    /// Richardson levels (1 = plain trapezoidal, 3 = sixth order).
    pub levels: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { step_factor: 0.01, levels: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSolution {
    pub times: Vec<f64>,
    pub u1: Vec<C>,
    pub v1: Vec<C>,
    /// `U_{1j}(t)` for each grid point, reservoir mode `j`.
    pub reservoir_u: Vec<Vec<C>>,
    pub reservoir_v: Vec<Vec<C>>,
    pub network: RenormalizedNetwork,
    /// Integration step of the finest level.
    pub step: f64,
}

impl KernelSolution {
    /// One-row trajectory over all modes, usable by the reduced-dynamics code.
    pub fn trajectory(&self) -> UVTrajectory {
        let n = self.network.n_modes();
        let row = |s: C, r: &[C]| {
            nalgebra::DMatrix::from_fn(1, n, |_, j| if j == 0 { s } else { r[j - 1] })
        };
        UVTrajectory {
            times: self.times.clone(),
            u: self.u1.iter().zip(&self.reservoir_u).map(|(s, r)| row(*s, r)).collect(),
            v: self.v1.iter().zip(&self.reservoir_v).map(|(s, r)| row(*s, r)).collect(),
            mode: PropagationMode::Full,
            n_system: 1,
        }
    }
}

fn check_uniform(times: &[f64]) -> Result<f64> {
    check_grid(times)?;
    if times.len() < 2 {
        return Ok(0.0);
    }
    let dt = times[1] - times[0];
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(times[times.len() - 1] * 1e-3) {
            return Err(Error::NonUniformGrid(i + 1));
        }
    }
    Ok(dt)
}

/// One trapezoidal march; returns the system row on every `sub`-th step.
fn march(w1: f64, w: &[f64], g: &[f64], h: f64, sub: usize, n_out: usize) -> Result<Vec<Vec<C>>> {
    let nr = w.len();
    let i = C::i();
    let rot_p: Vec<C> = w.iter().map(|&wj| C::from_polar(1.0, wj * h)).collect();
    let rot_m: Vec<C> = rot_p.iter().map(|z| z.conj()).collect();
    // Σ_{τ_i < t} weight_i e^{±iω_j (t − τ_i)} D_i, excluding the endpoint term
    let mut ep = vec![C::new(0.0, 0.0); nr];
    let mut em = vec![C::new(0.0, 0.0); nr];
    let g2: Vec<f64> = g.iter().map(|x| x * x).collect();
    let lhs_u = C::new(1.0, -0.5 * w1 * h);
    let lhs_v = C::new(1.0, 0.5 * w1 * h);
    let (mut u, mut v) = (C::new(1.0, 0.0), C::new(0.0, 0.0));
    let mut conv = C::new(0.0, 0.0);
    let mut out = Vec::with_capacity(n_out);
    // `d` is the trapezoid's endpoint contribution `(h/2) D(t)`
    let emit = |u: C, v: C, ep: &[C], em: &[C], d: C, out: &mut Vec<Vec<C>>| {
        let mut row = Vec::with_capacity(2 + 2 * nr);
        row.push(u);
        row.push(v);
        for j in 0..nr {
            row.push(-i * g[j] * (ep[j] + d));
        }
        for j in 0..nr {
            row.push(-i * g[j] * (em[j] + d));
        }
        out.push(row);
    };
    emit(u, v, &ep, &em, C::new(0.0, 0.0), &mut out);
    let steps = (n_out - 1) * sub;
    for n in 0..steps {
        let d = u - v;
        let weight = if n == 0 { 0.5 * h } else { h };
        let mut next = C::new(0.0, 0.0);
        for j in 0..nr {
            ep[j] = rot_p[j] * (ep[j] + weight * d);
            em[j] = rot_m[j] * (em[j] + weight * d);
            next += g2[j] * (ep[j] - em[j]);
        }
        // trapezoidal convolution ∫₀^{t_{n+1}} h(t_{n+1} − τ) D dτ; the endpoint has h(0) = 0
        let next = next / (2.0 * i);
        let drive = i * h * (conv + next);
        u = (u * C::new(1.0, 0.5 * w1 * h) - drive) / lhs_u;
        v = (v * C::new(1.0, -0.5 * w1 * h) - drive) / lhs_v;
        conv = next;
        if !(u.is_finite() && v.is_finite()) {
            return Err(Error::IntegratorFailure { t: (n + 1) as f64 * h, reason: "non-finite kernel solution".into() });
        }
        if (n + 1) % sub == 0 {
            emit(u, v, &ep, &em, 0.5 * h * (u - v), &mut out);
        }
    }
    Ok(out)
}

/// Solves the single-mode memory-kernel equations on a uniform grid.
pub fn evolve_single_mode_kernel(kernel: &KernelSpec, times: &[f64], opts: &KernelOptions) -> Result<KernelSolution> {
    let dt = check_uniform(times)?;
    let (w, g) = kernel.modes()?;
    let w1 = kernel.system_frequency();
    let network = RenormalizedNetwork::star(w1, &w, &g);
    let nr = w.len();
    let levels = opts.levels.max(1);

    let w_max = w.iter().copied().fold(w1.abs(), f64::max).max(f64::MIN_POSITIVE);
    let h_cap = opts.step_factor / w_max;
    let sub = if dt > 0.0 { (dt / h_cap).ceil().max(1.0) as usize } else { 1 };
    let h = if dt > 0.0 { dt / sub as f64 } else { 0.0 };

    let runs: Vec<Vec<Vec<C>>> = (0..levels)
        .into_par_iter()
        .map(|l| march(w1, &w, &g, h / (1 << l) as f64, sub << l, times.len()))
        .collect::<Result<_>>()?;

    // Richardson table on each output value, error expansion in h²
    let combined: Vec<Vec<C>> = (0..times.len())
        .map(|ti| {
            (0..2 + 2 * nr)
                .map(|c| {
                    let mut col: Vec<C> = runs.iter().map(|r| r[ti][c]).collect();
                    for k in 1..levels {
                        let f = 4f64.powi(k as i32);
                        for l in (k..levels).rev() {
                            col[l] = (col[l] * f - col[l - 1]) / (f - 1.0);
                        }
                    }
                    col[levels - 1]
                })
                .collect()
        })
        .collect();

    Ok(KernelSolution {
        times: times.to_vec(),
        u1: combined.iter().map(|r| r[0]).collect(),
        v1: combined.iter().map(|r| r[1]).collect(),
        reservoir_u: combined.iter().map(|r| r[2..2 + nr].to_vec()).collect(),
        reservoir_v: combined.iter().map(|r| r[2 + nr..].to_vec()).collect(),
        network,
        step: h / (1 << (levels - 1)) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::OdeOptions;
    use crate::propagator::{evolve_uv, RowSelection};
    use crate::spectral::{Discretization, SpectralFamily};

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..=n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn kernel_values() {
        let k = KernelSpec::Discrete { system_frequency: 1.0, frequencies: vec![2.0], couplings: vec![1.0] };
        assert_eq!(memory_kernel(&k, 0.0), 0.0);
        assert!((memory_kernel(&k, 0.7) - (1.4f64).sin()).abs() < 1e-15);
    }

    #[test]
    fn uncoupled_is_free_rotation() {
        let k = KernelSpec::Discrete { system_frequency: 1.3, frequencies: vec![1.0], couplings: vec![0.0] };
        let s = evolve_single_mode_kernel(&k, &grid(50, 0.1), &KernelOptions::default()).unwrap();
        assert_eq!(s.u1[0], C::new(1.0, 0.0));
        for (t, (u, v)) in s.times.iter().zip(s.u1.iter().zip(&s.v1)) {
            assert!((u - C::from_polar(1.0, 1.3 * t)).norm() < 1e-10);
            assert_eq!(*v, C::new(0.0, 0.0));
        }
    }

    #[test]
    fn single_mode_matches_ode() {
        let k = KernelSpec::Discrete { system_frequency: 1.0, frequencies: vec![1.2], couplings: vec![0.3] };
        let times = grid(100, 0.1);
        let s = evolve_single_mode_kernel(&k, &times, &KernelOptions::default()).unwrap();
        let ode = evolve_uv(&k.network().unwrap(), &times, RowSelection::SystemOnly, PropagationMode::Full, &OdeOptions::with_tolerance(1e-12)).unwrap();
        let tr = s.trajectory();
        for i in 0..times.len() {
            let du = (&tr.u[i] - &ode.u[i]).iter().map(|z| z.norm()).fold(0.0, f64::max);
            let dv = (&tr.v[i] - &ode.v[i]).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(du < 1e-6 && dv < 1e-6, "t={} du={du} dv={dv}", times[i]);
        }
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let k = KernelSpec::Discrete { system_frequency: 1.0, frequencies: vec![1.0], couplings: vec![0.1] };
        assert_eq!(evolve_single_mode_kernel(&k, &[0.0, 0.1, 0.3], &KernelOptions::default()).unwrap_err(), Error::NonUniformGrid(2));
    }

    #[test]
    fn ohmic_kernel_refinement() {
        let fam = SpectralFamily::Ohmic { kappa: 0.05, cutoff: 1.0 };
        let make = |n| {
            let p = SpectralPreset { family: fam, discretization: Discretization { n_modes: n, ..Default::default() } };
            let r = p.discretize().unwrap();
            KernelSpec::Discrete { system_frequency: 1.0, frequencies: r.frequencies, couplings: r.couplings }
        };
        let (a, b) = (make(200), make(2000));
        let cont = KernelSpec::Continuum {
            system_frequency: 1.0,
            preset: SpectralPreset { family: fam, discretization: Discretization::default() },
        };
        for i in 0..=50 {
            let t = i as f64 * 0.1;
            assert!((memory_kernel(&a, t) - memory_kernel(&b, t)).abs() < 1e-4);
            assert!((memory_kernel(&cont, t) - memory_kernel(&b, t)).abs() < 1e-4);
        }
    }
}
