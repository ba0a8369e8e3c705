//! Exact single-mode master equation.
//!
//! The reduced dynamics of one system mode is generated by
//!
//! ```text
//! dρ/dt = −i[ω a†a + ξ a†² + ξ* a², ρ] + Σ_ab K_ab (F_a ρ F_b† − ½{F_b† F_a, ρ})
//! F = (a, a†),   K = [[γ₁ + γ₂, −η*], [−η, γ₂]]
//! ```
//!
//! Coefficients are read off the solved map. With `Δ = |U|² − |V|²`
//! (system entries, derivatives from the propagator right-hand side):
//!
//! ```text
//! ω  = Im(U* U̇ − V* V̇) / Δ
//! γ₁ = −2 Re(U* U̇ − V* V̇) / Δ
//! ξ  = (i/2) · conj(U V̇ − V U̇) / Δ
//! γ₂ = Ȧ + γ₁ (A − ½) − 4 Im(ξ B)
//! η  = conj(Ḃ) + (γ₁ + 2iω) B* + 4i ξ A
//! ```
//!
//! On the symmetric-ordered moments `α = ⟨a⟩`, `n = ½⟨{δa†, δa}⟩`,
//! `m = ⟨δa δa⟩` this gives
//!
//! ```text
//! dα/dt = (−iω − γ₁/2) α − 2iξ α*
//! dn/dt = −γ₁ (n − ½) + γ₂ + 4 Im(ξ m*)
//! dm/dt = −(2iω + γ₁) m − 4iξ n + η
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::network::RenormalizedNetwork;
use crate::propagator::{row_rhs, CouplingColumns, PropagationMode, UVTrajectory};
use crate::reduced::{noise_with_derivative, ReservoirMoments};

/// Relative threshold on `|U|² − |V|²` below which a point is masked.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;
/// `|γ₁|` below which its sign is taken as `+1`.
pub const GAMMA1_ZERO: f64 = 1e-13;
/// Slack used by the Markovianity inequalities.
pub const MARKOV_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MasterCoefficients {
    pub times: Vec<f64>,
    pub omega: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub xi: Vec<C>,
    pub eta: Vec<C>,
    /// Grid points where the map is degenerate; coefficients there are NaN.
    pub masked: Vec<bool>,
    pub rwa: bool,
}

impl MasterCoefficients {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Times of masked grid points.
    pub fn degenerate_points(&self) -> Vec<f64> {
        self.times.iter().zip(&self.masked).filter(|(_, m)| **m).map(|(t, _)| *t).collect()
    }

    /// Kossakowski matrix in the basis `(a, a†)` at grid index `i`.
    pub fn kossakowski(&self, i: usize) -> [[C; 2]; 2] {
        kossakowski(self.gamma1[i], self.gamma2[i], self.eta[i])
    }

    /// Right-hand side of the moment equations at grid index `i`.
    pub fn moment_rhs(&self, i: usize, s: &MomentState) -> MomentState {
        moment_rhs(self.omega[i], self.gamma1[i], self.gamma2[i], self.xi[i], self.eta[i], s)
    }
}

pub fn kossakowski(gamma1: f64, gamma2: f64, eta: C) -> [[C; 2]; 2] {
    [
        [C::new(gamma1 + gamma2, 0.0), -eta.conj()],
        [-eta, C::new(gamma2, 0.0)],
    ]
}

/// Extracts the coefficients from a single-system-mode trajectory that keeps
/// the full system row.
pub fn extract_coefficients(
    uv: &UVTrajectory,
    net: &RenormalizedNetwork,
    moments: &ReservoirMoments,
) -> Result<MasterCoefficients> {
    if uv.n_system != 1 || net.n_system != 1 {
        return Err(Error::MultiModeUnsupported(uv.n_system.max(net.n_system)));
    }
    if uv.n_modes() != net.n_modes() || uv.n_rows() < 1 {
        return Err(Error::ShapeMismatch(format!(
            "trajectory spans {} modes, network has {}",
            uv.n_modes(),
            net.n_modes()
        )));
    }
    if moments.n_modes() != net.n_reservoir() {
        return Err(Error::ShapeMismatch(format!(
            "{} reservoir moments for {} reservoir modes",
            moments.n_modes(),
            net.n_reservoir()
        )));
    }
    moments.validate()?;
    let n = net.n_modes();
    let cols = CouplingColumns::new(net);
    let max_u = uv.u.iter().map(|m| m[(0, 0)].norm_sqr()).fold(0.0, f64::max);
    let eps = DEGENERACY_THRESHOLD * max_u;
    let i_unit = C::i();

    let points: Vec<(f64, f64, f64, C, C, bool)> = (0..uv.len())
        .into_par_iter()
        .map(|ti| {
            let u: Vec<C> = uv.u[ti].row(0).iter().copied().collect();
            let v: Vec<C> = uv.v[ti].row(0).iter().copied().collect();
            let mut du = vec![C::new(0.0, 0.0); n];
            let mut dv = vec![C::new(0.0, 0.0); n];
            row_rhs(&net.frequencies, &cols, uv.mode, &u, &v, &mut du, &mut dv);
            let (u0, v0, du0, dv0) = (u[0], v[0], du[0], dv[0]);
            let delta = u0.norm_sqr() - v0.norm_sqr();
            if delta < eps {
                let nan = f64::NAN;
                return (nan, nan, nan, C::new(nan, nan), C::new(nan, nan), true);
            }
            let r = n - 1;
            let block = |x: &[C]| DMatrix::from_fn(1, r, |_, j| x[j + 1]);
            let noise = noise_with_derivative(&block(&u), &block(&v), &block(&du), &block(&dv), moments);
            let (a, b, da, db) = (noise.a[(0, 0)].re, noise.b[(0, 0)], noise.da[(0, 0)].re, noise.db[(0, 0)]);

            let w = u0.conj() * du0 - v0.conj() * dv0;
            let omega = w.im / delta;
            let gamma1 = -2.0 * w.re / delta;
            let xi = 0.5 * i_unit * (u0 * dv0 - v0 * du0).conj() / delta;
            let gamma2 = da + gamma1 * (a - 0.5) - 4.0 * (xi * b).im;
            let eta = db.conj() + (gamma1 + 2.0 * i_unit * omega) * b.conj() + 4.0 * i_unit * xi * a;
            (omega, gamma1, gamma2, xi, eta, false)
        })
        .collect();

    Ok(MasterCoefficients {
        times: uv.times.clone(),
        omega: points.iter().map(|p| p.0).collect(),
        gamma1: points.iter().map(|p| p.1).collect(),
        gamma2: points.iter().map(|p| p.2).collect(),
        xi: points.iter().map(|p| p.3).collect(),
        eta: points.iter().map(|p| p.4).collect(),
        masked: points.iter().map(|p| p.5).collect(),
        rwa: uv.mode == PropagationMode::Rwa,
    })
}

/// Diagonal (Lindblad) form of the dissipator: rates `λ₁,₂` with operators
/// `L_n = w_n · (a, a†)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LindbladForm {
    pub times: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub theta: Vec<f64>,
    /// Mixing phase `η/|η|`, frozen where `η = 0`.
    pub phase: Vec<C>,
    pub l1: Vec<[C; 2]>,
    pub l2: Vec<[C; 2]>,
}

impl LindbladForm {
    /// Kossakowski matrix rebuilt as `Σ_n λ_n w_n w_n†`.
    pub fn kossakowski(&self, i: usize) -> [[C; 2]; 2] {
        let mut k = [[C::new(0.0, 0.0); 2]; 2];
        for (lam, w) in [(self.lambda1[i], self.l1[i]), (self.lambda2[i], self.l2[i])] {
            for a in 0..2 {
                for b in 0..2 {
                    k[a][b] += lam * w[a] * w[b].conj();
                }
            }
        }
        k
    }
}

pub fn lindblad_diagonalize(coeffs: &MasterCoefficients) -> LindbladForm {
    let n = coeffs.len();
    let mut out = LindbladForm {
        times: coeffs.times.clone(),
        lambda1: Vec::with_capacity(n),
        lambda2: Vec::with_capacity(n),
        theta: Vec::with_capacity(n),
        phase: Vec::with_capacity(n),
        l1: Vec::with_capacity(n),
        l2: Vec::with_capacity(n),
    };
    let mut phase = C::new(1.0, 0.0);
    let nan = C::new(f64::NAN, f64::NAN);
    for i in 0..n {
        if coeffs.masked[i] {
            out.lambda1.push(f64::NAN);
            out.lambda2.push(f64::NAN);
            out.theta.push(f64::NAN);
            out.phase.push(phase);
            out.l1.push([nan, nan]);
            out.l2.push([nan, nan]);
            continue;
        }
        let (g1, g2, eta) = (coeffs.gamma1[i], coeffs.gamma2[i], coeffs.eta[i]);
        let mag = eta.norm();
        if mag > 0.0 {
            phase = eta / mag;
        }
        let zero = g1.abs() < GAMMA1_ZERO;
        let sign = if zero || g1 > 0.0 { 1.0 } else { -1.0 };
        let root = (0.25 * g1 * g1 + mag * mag).sqrt();
        let theta = if zero {
            if mag > 0.0 {
                std::f64::consts::FRAC_PI_2
            } else {
                0.0
            }
        } else {
            (2.0 * mag / g1).atan()
        };
        let (s, c) = (0.5 * theta).sin_cos();
        out.lambda1.push(0.5 * g1 + g2 + sign * root);
        out.lambda2.push(0.5 * g1 + g2 - sign * root);
        out.theta.push(theta);
        out.phase.push(phase);
        out.l1.push([C::new(c, 0.0), -s * phase]);
        out.l2.push([s * phase.conj(), C::new(c, 0.0)]);
    }
    out
}

/// Linear data of the dissipator's action on `(α, n, m)`:
/// `dα = g₀ α`, `dn = g₀' n + g₁`, `dm = g₀' m + g₂`, `dm* = g₀' m* + g₃`,
/// returned as `[g₀, g₀', g₁, g₂, g₃]` with `g₀' = K₂₂ − K₁₁`, `g₀ = g₀'/2`.
pub fn dissipator_generator(k: &[[C; 2]; 2]) -> [C; 5] {
    let d = k[1][1] - k[0][0];
    [0.5 * d, d, 0.5 * (k[0][0] + k[1][1]), -k[1][0], -k[0][1]]
}

/// Largest mismatch between the generators of the two dissipator forms, and
/// of the trace identity `λ₁ + λ₂ = γ₁ + 2γ₂`, over unmasked points.
pub fn lindblad_defect(coeffs: &MasterCoefficients, form: &LindbladForm) -> (f64, f64) {
    let mut gen: f64 = 0.0;
    let mut trace: f64 = 0.0;
    for i in 0..coeffs.len() {
        if coeffs.masked[i] {
            continue;
        }
        let a = dissipator_generator(&coeffs.kossakowski(i));
        let b = dissipator_generator(&form.kossakowski(i));
        for (x, y) in a.iter().zip(&b) {
            gen = gen.max((x - y).norm());
        }
        trace = trace.max((form.lambda1[i] + form.lambda2[i] - coeffs.gamma1[i] - 2.0 * coeffs.gamma2[i]).abs());
    }
    (gen, trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Markovian,
    TimeDependentMarkovian,
    NonMarkovian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovianityReport {
    pub rwa: bool,
    pub times: Vec<f64>,
    /// `γ₁ + 2γ₂`.
    pub ineq1: Vec<f64>,
    /// `γ₁γ₂ + γ₂² − |η|²`, or `γ₂` with the rotating-wave pair.
    pub ineq2: Vec<f64>,
    pub satisfied: Vec<(bool, bool)>,
    /// Whether both Lindblad rates are non-negative.
    pub rates_nonnegative: Vec<bool>,
    pub first_violation: Option<f64>,
    pub classification: Classification,
    /// Grid indices where the inequality test and the rate test disagree.
    pub disagreements: Vec<usize>,
}

pub fn markovianity_report(coeffs: &MasterCoefficients, rwa: bool) -> MarkovianityReport {
    markovianity_report_with_tolerance(coeffs, rwa, MARKOV_TOLERANCE)
}

pub fn markovianity_report_with_tolerance(coeffs: &MasterCoefficients, rwa: bool, tol: f64) -> MarkovianityReport {
    let form = lindblad_diagonalize(coeffs);
    let n = coeffs.len();
    let mut rep = MarkovianityReport {
        rwa,
        times: coeffs.times.clone(),
        ineq1: Vec::with_capacity(n),
        ineq2: Vec::with_capacity(n),
        satisfied: Vec::with_capacity(n),
        rates_nonnegative: Vec::with_capacity(n),
        first_violation: None,
        classification: Classification::Markovian,
        disagreements: Vec::new(),
    };
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for i in 0..n {
        let (g1, g2, eta) = (coeffs.gamma1[i], coeffs.gamma2[i], coeffs.eta[i]);
        let q1 = g1 + 2.0 * g2;
        let q2 = if rwa { g2 } else { g1 * g2 + g2 * g2 - eta.norm_sqr() };
        rep.ineq1.push(q1);
        rep.ineq2.push(q2);
        if coeffs.masked[i] {
            rep.satisfied.push((true, true));
            rep.rates_nonnegative.push(true);
            continue;
        }
        let ok = (q1 >= -tol, q2 >= -tol);
        let rates = form.lambda1[i] >= -tol && form.lambda2[i] >= -tol;
        if (ok.0 && ok.1) != rates {
            rep.disagreements.push(i);
        }
        if !(ok.0 && ok.1) && rep.first_violation.is_none() {
            rep.first_violation = Some(coeffs.times[i]);
        }
        for (k, lam) in [form.lambda1[i], form.lambda2[i]].into_iter().enumerate() {
            lo[k] = lo[k].min(lam);
            hi[k] = hi[k].max(lam);
        }
        rep.satisfied.push(ok);
        rep.rates_nonnegative.push(rates);
    }
    let scale = hi.iter().chain(&lo).filter(|x| x.is_finite()).map(|x| x.abs()).fold(0.0, f64::max);
    let varies = (0..2).any(|k| hi[k] - lo[k] > 1e-9 * scale.max(1e-300));
    rep.classification = if rep.first_violation.is_some() {
        Classification::NonMarkovian
    } else if varies && scale > 0.0 {
        Classification::TimeDependentMarkovian
    } else {
        Classification::Markovian
    };
    rep
}

/// Symmetric-ordered first and second moments of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentState {
    pub alpha: C,
    pub n: f64,
    pub m: C,
}

impl MomentState {
    pub fn from_state(s: &GaussianState) -> Result<Self> {
        if s.n_modes() != 1 {
            return Err(Error::MultiModeUnsupported(s.n_modes()));
        }
        let (n, m) = s.moments();
        Ok(Self { alpha: s.mean[0], n: n[(0, 0)].re, m: m[(0, 0)] })
    }

    fn axpy(&self, h: f64, d: &MomentState) -> MomentState {
        MomentState { alpha: self.alpha + d.alpha * h, n: self.n + d.n * h, m: self.m + d.m * h }
    }
}

pub fn moment_rhs(omega: f64, gamma1: f64, gamma2: f64, xi: C, eta: C, s: &MomentState) -> MomentState {
    let i = C::i();
    MomentState {
        alpha: (-i * omega - 0.5 * gamma1) * s.alpha - 2.0 * i * xi * s.alpha.conj(),
        n: -gamma1 * (s.n - 0.5) + gamma2 + 4.0 * (xi * s.m.conj()).im,
        m: -(2.0 * i * omega + gamma1) * s.m - 4.0 * i * xi * s.n + eta,
    }
}

/// Integrates the moment equations with classical RK4 on steps of two grid
/// intervals, using the middle grid point as the half-step. The grid must be
/// uniform and free of masked points; returns states at even grid indices.
pub fn reintegrate_moments(coeffs: &MasterCoefficients, init: MomentState) -> Result<Vec<(usize, MomentState)>> {
    if let Some(t) = coeffs.degenerate_points().first() {
        return Err(Error::DegenerateMap(*t));
    }
    let times = &coeffs.times;
    if times.len() >= 2 {
        let dt = times[1] - times[0];
        if let Some(i) = times.windows(2).position(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
            return Err(Error::NonUniformGrid(i + 1));
        }
    }
    let mut out = vec![(0, init)];
    let mut s = init;
    let mut i = 0;
    while i + 2 < times.len() {
        let h = times[i + 2] - times[i];
        let k1 = coeffs.moment_rhs(i, &s);
        let k2 = coeffs.moment_rhs(i + 1, &s.axpy(0.5 * h, &k1));
        let k3 = coeffs.moment_rhs(i + 1, &s.axpy(0.5 * h, &k2));
        let k4 = coeffs.moment_rhs(i + 2, &s.axpy(h, &k3));
        s = MomentState {
            alpha: s.alpha + (k1.alpha + 2.0 * k2.alpha + 2.0 * k3.alpha + k4.alpha) * (h / 6.0),
            n: s.n + (k1.n + 2.0 * k2.n + 2.0 * k3.n + k4.n) * (h / 6.0),
            m: s.m + (k1.m + 2.0 * k2.m + 2.0 * k3.m + k4.m) * (h / 6.0),
        };
        i += 2;
        out.push((i, s));
    }
    Ok(out)
}
