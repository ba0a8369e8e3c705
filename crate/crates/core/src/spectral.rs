//! Spectral densities of a star reservoir and their discretization into modes.
//!
//! A discrete star with couplings `g_j` at frequencies `ω_j` has
//! `J(ω) = Σ_j g_j² δ(ω − ω_j)`. Discretization bins `[ω_min, ω_max]`,
//! places one mode at each bin midpoint, and assigns `g_j² = ∫_bin J`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NetworkSpec, RenormalizedNetwork};
use crate::quad::composite;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SpectralFamily {
    /// `κ ω e^{−ω/ω_c}`.
    Ohmic { kappa: f64, cutoff: f64 },
    /// `s (w/π) / ((ω − ω₀)² + w²)`.
    Lorentzian { strength: f64, center: f64, width: f64 },
    /// Constant `level` on the band.
    Flat { level: f64 },
    /// One reservoir mode.
    SingleMode { coupling: f64, frequency: f64 },
}

impl SpectralFamily {
    /// Density at `omega`; zero for the single-mode family.
    pub fn density(&self, omega: f64) -> f64 {
        match *self {
            Self::Ohmic { kappa, cutoff } => kappa * omega * (-omega / cutoff).exp(),
            Self::Lorentzian { strength, center, width } => {
                strength * width / std::f64::consts::PI / ((omega - center).powi(2) + width * width)
            }
            Self::Flat { level } => level,
            Self::SingleMode { .. } => 0.0,
        }
    }

    fn default_band(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Ohmic { cutoff, .. } => Some((1e-3 * cutoff, 10.0 * cutoff)),
            Self::Lorentzian { center, width, .. } => {
                Some(((center - 10.0 * width).max(1e-3 * center), center + 10.0 * width))
            }
            Self::Flat { .. } => None,
            Self::SingleMode { frequency, .. } => Some((frequency, frequency)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BinScheme {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Discretization {
    pub n_modes: usize,
    pub scheme: BinScheme,
    /// Lower band edge; family default when absent.
    pub omega_min: Option<f64>,
    /// Upper band edge; `10 ω_c` for Ohmic when absent.
    pub omega_max: Option<f64>,
}

impl Default for Discretization {
    fn default() -> Self {
        Self { n_modes: 200, scheme: BinScheme::Linear, omega_min: None, omega_max: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPreset {
    #[serde(flatten)]
    pub family: SpectralFamily,
    #[serde(default)]
    pub discretization: Discretization,
}

/// Discrete star reservoir with its band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteReservoir {
    pub frequencies: Vec<f64>,
    pub couplings: Vec<f64>,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl DiscreteReservoir {
    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    /// Time before the discrete reservoir revives, `2π n / (ω_max − ω_min)`.
    pub fn validity_horizon(&self) -> f64 {
        let width = self.omega_max - self.omega_min;
        if width > 0.0 {
            2.0 * std::f64::consts::PI * self.n_modes() as f64 / width
        } else {
            f64::INFINITY
        }
    }

    pub fn coupling_weight(&self) -> f64 {
        self.couplings.iter().map(|g| g * g).sum()
    }

    /// Star network with system frequency `omega_1`.
    pub fn network(&self, omega_1: f64) -> RenormalizedNetwork {
        RenormalizedNetwork::star(omega_1, &self.frequencies, &self.couplings)
    }

    /// Equivalent position-coupled network with unit masses.
    pub fn network_spec(&self, omega_1: f64) -> Result<NetworkSpec> {
        self.network(omega_1).to_network_spec(&vec![1.0; self.n_modes() + 1])
    }
}

impl SpectralPreset {
    pub fn band(&self) -> Result<(f64, f64)> {
        let d = self.family.default_band();
        let lo = self.discretization.omega_min.or(d.map(|b| b.0));
        let hi = self.discretization.omega_max.or(d.map(|b| b.1));
        let (Some(lo), Some(hi)) = (lo, hi) else {
            return Err(Error::InvalidPreset("band edges omega_min/omega_max are required for this family".into()));
        };
        Ok((lo, hi))
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band()?;
        if let SpectralFamily::SingleMode { frequency, .. } = self.family {
            if !(frequency > 0.0) {
                return Err(Error::InvalidPreset("single-mode frequency must be positive".into()));
            }
            return Ok(());
        }
        if self.discretization.n_modes == 0 {
            return Err(Error::InvalidPreset("n_modes must be at least 1".into()));
        }
        if !(lo > 0.0) {
            return Err(Error::InvalidPreset(format!("omega_min must be positive (got {lo})")));
        }
        if lo >= hi {
            return Err(Error::EmptyBand(lo, hi));
        }
        Ok(())
    }

    /// `∫ J` over the band.
    pub fn total_weight(&self) -> Result<f64> {
        self.validate()?;
        if let SpectralFamily::SingleMode { coupling, .. } = self.family {
            return Ok(coupling * coupling);
        }
        let (lo, hi) = self.band()?;
        Ok(composite(|w| self.family.density(w), lo, hi, 256, 16))
    }

    pub fn discretize(&self) -> Result<DiscreteReservoir> {
        self.validate()?;
        if let SpectralFamily::SingleMode { coupling, frequency } = self.family {
            return Ok(DiscreteReservoir {
                frequencies: vec![frequency],
                couplings: vec![coupling],
                omega_min: frequency,
                omega_max: frequency,
            });
        }
        let (lo, hi) = self.band()?;
        let n = self.discretization.n_modes;
        let edge = |i: usize| match self.discretization.scheme {
            BinScheme::Linear => lo + (hi - lo) * i as f64 / n as f64,
            BinScheme::Log => lo * (hi / lo).powf(i as f64 / n as f64),
        };
        let mut frequencies = Vec::with_capacity(n);
        let mut couplings = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (edge(i), edge(i + 1));
            frequencies.push(0.5 * (a + b));
            couplings.push(composite(|w| self.family.density(w), a, b, 1, 8).max(0.0).sqrt());
        }
        Ok(DiscreteReservoir { frequencies, couplings, omega_min: lo, omega_max: hi })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_is_exact() {
        let p = SpectralPreset { family: SpectralFamily::SingleMode { coupling: 0.3, frequency: 1.2 }, discretization: Discretization::default() };
        let r = p.discretize().unwrap();
        assert_eq!(r.frequencies, vec![1.2]);
        assert_eq!(r.couplings, vec![0.3]);
    }

    #[test]
    fn flat_weight() {
        let p = SpectralPreset {
            family: SpectralFamily::Flat { level: 0.02 },
            discretization: Discretization { n_modes: 100, omega_min: Some(1.0), omega_max: Some(2.0), ..Default::default() },
        };
        let r = p.discretize().unwrap();
        assert!((r.coupling_weight() - 0.02).abs() < 1e-3 * 0.02);
    }

    #[test]
    fn empty_band_rejected() {
        let p = SpectralPreset {
            family: SpectralFamily::Flat { level: 1.0 },
            discretization: Discretization { omega_min: Some(2.0), omega_max: Some(1.0), ..Default::default() },
        };
        assert_eq!(p.discretize(), Err(Error::EmptyBand(2.0, 1.0)));
    }

    #[test]
    fn ohmic_weight_matches_density() {
        for scheme in [BinScheme::Linear, BinScheme::Log] {
            let p = SpectralPreset {
                family: SpectralFamily::Ohmic { kappa: 0.01, cutoff: 2.0 },
                discretization: Discretization { scheme, ..Default::default() },
            };
            let r = p.discretize().unwrap();
            let w = p.total_weight().unwrap();
            assert!((r.coupling_weight() - w).abs() < 0.01 * w);
            // κ ω_c² (1 − 11 e^{-10}) up to the tiny lower cutoff
            assert!((w - 0.04).abs() < 1e-3 * 0.04);
        }
    }

    #[test]
    fn horizon_default() {
        let p = SpectralPreset { family: SpectralFamily::Ohmic { kappa: 1e-4, cutoff: 1.0 }, discretization: Discretization::default() };
        let h = p.discretize().unwrap().validity_horizon();
        assert!((h - 2.0 * std::f64::consts::PI * 200.0 / (10.0 - 1e-3)).abs() < 1e-9);
    }
}
