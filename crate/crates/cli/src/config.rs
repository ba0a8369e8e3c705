//! TOML simulation config. Every field has a default except the network.
//!
//! ```toml
//! seed = 0                        # drives `network.kind = "random"`; below 2^63
//! mode = "full"                   # "full" | "rwa"
//! backend = "ode"                 # "ode" | "kernel" | "oracle"
//!
//! [network]                       # kind = "star" | "explicit" | "random"
//! kind = "star"
//! system_frequency = 1.0
//! preset = "single_mode_strong"   # or an inline [network.spectral] table
//!
//! [reservoir]                     # state = "zero_temperature" | "thermal" | "squeezed"
//! state = "thermal"
//! temperature = 0.5               # or n_bar = [..] with one entry per reservoir mode
//!
//! [time]
//! t_max = 10.0
//! n_points = 1001
//! allow_beyond_horizon = false
//!
//! [tolerances]
//! rtol = 1e-9
//! atol = 1e-9
//! markov = 1e-10
//! kernel_step_factor = 0.01
//! kernel_levels = 3
//!
//! [outputs]                       # all default to true except `uv` and `noise`
//! uv = false
//! noise = false
//! coefficients = true
//! state = true
//! distortion = true
//! markovianity = true
//!
//! [[initial_state]]               # one table per system mode; vacuum if absent
//! displacement = [1.0, 0.0]
//! n_bar = 0.0
//! squeeze = 0.0
//! squeeze_phase = 0.0
//!
//! [sweep]                         # read by the `sweep` verb only
//! max_points = 4096
//! window = 0.25                   # trailing fraction of the time grid
//! [[sweep.axes]]
//! key = "network.spectral.coupling"
//! values = [0.01, 0.1]
//! ```

use std::str::FromStr;

use exactdyn::spectral::{Discretization, SpectralFamily, SpectralPreset};
use exactdyn::{NetworkSpec, PropagationMode};
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: PropagationMode,
    #[serde(default)]
    pub backend: Backend,
    pub network: NetworkConfig,
    #[serde(default)]
    pub reservoir: ReservoirConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_state: Vec<InitialMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Ode,
    /// Single-mode memory-kernel path.
    Kernel,
    /// Normal-mode diagonalization of the whole network.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkConfig {
    Star {
        #[serde(default = "one")]
        system_frequency: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        preset: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spectral: Option<SpectralPreset>,
    },
    Explicit(NetworkSpec),
    /// Dense random couplings drawn from the config seed.
    Random {
        #[serde(default = "one_usize")]
        n_system: usize,
        n_reservoir: usize,
        #[serde(default = "default_strength")]
        strength: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "state", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReservoirConfig {
    #[default]
    ZeroTemperature,
    Thermal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        temperature: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_bar: Option<Vec<f64>>,
    },
    /// Squeezed thermal modes with a common squeeze `r e^{iφ}`.
    Squeezed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_bar: Option<Vec<f64>>,
        r: f64,
        #[serde(default)]
        phi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    pub n_points: usize,
    /// Permit `t_max` beyond the recurrence horizon of a discretized band.
    pub allow_beyond_horizon: bool,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t_max: 10.0, n_points: 1001, allow_beyond_horizon: false }
    }
}

impl TimeConfig {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.n_points - 1;
        (0..=n).map(|i| self.t_max * i as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub markov: f64,
    pub kernel_step_factor: f64,
    pub kernel_levels: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-9, markov: exactdyn::master::MARKOV_TOLERANCE, kernel_step_factor: 0.01, kernel_levels: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub uv: bool,
    pub noise: bool,
    pub coefficients: bool,
    pub state: bool,
    pub distortion: bool,
    pub markovianity: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { uv: false, noise: false, coefficients: true, state: true, distortion: true, markovianity: true }
    }
}

/// One system mode of the initial product state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct InitialMode {
    /// `[Re α, Im α]`.
    pub displacement: [f64; 2],
    pub n_bar: f64,
    pub squeeze: f64,
    pub squeeze_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<Axis>,
    pub max_points: usize,
    pub window: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { axes: Vec::new(), max_points: 4096, window: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted path into the config, e.g. `network.spectral.coupling`.
    pub key: String,
    pub values: Vec<Value>,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_strength() -> f64 {
    0.2
}

pub struct NamedPreset {
    pub name: &'static str,
    pub description: &'static str,
    pub preset: SpectralPreset,
}

/// Built-in spectral densities addressable by `network.preset`.
pub fn named_presets() -> Vec<NamedPreset> {
    let disc = |n_modes| Discretization { n_modes, ..Default::default() };
    vec![
        NamedPreset {
            name: "single_mode_strong",
            description: "one reservoir mode at ω₀ = 1 with g = 0.3",
            preset: SpectralPreset { family: SpectralFamily::SingleMode { coupling: 0.3, frequency: 1.0 }, discretization: disc(1) },
        },
        NamedPreset {
            name: "ohmic_weak",
            description: "Ohmic κ = 1e-4, ω_c = 1, 200 linear bins",
            preset: SpectralPreset { family: SpectralFamily::Ohmic { kappa: 1e-4, cutoff: 1.0 }, discretization: disc(200) },
        },
        NamedPreset {
            name: "ohmic_50",
            description: "Ohmic κ = 2e-3, ω_c = 1, 50 linear bins",
            preset: SpectralPreset { family: SpectralFamily::Ohmic { kappa: 2e-3, cutoff: 1.0 }, discretization: disc(50) },
        },
        NamedPreset {
            name: "lorentzian",
            description: "Lorentzian peak at ω₀ = 1, width 0.1, weight 0.01",
            preset: SpectralPreset {
                family: SpectralFamily::Lorentzian { strength: 0.01, center: 1.0, width: 0.1 },
                discretization: disc(200),
            },
        },
        NamedPreset {
            name: "flat",
            description: "flat density 1e-3 on [0.5, 1.5]",
            preset: SpectralPreset {
                family: SpectralFamily::Flat { level: 1e-3 },
                discretization: Discretization { omega_min: Some(0.5), omega_max: Some(1.5), ..disc(100) },
            },
        },
    ]
}

pub fn lookup_preset(name: &str) -> Option<SpectralPreset> {
    named_presets().into_iter().find(|p| p.name == name).map(|p| p.preset)
}

/// Example configs shipped with the binary.
pub const BUNDLED: &[(&str, &str)] = &[
    ("nonmarkov_single_mode", include_str!("../configs/nonmarkov_single_mode.toml")),
    ("ohmic_weak_rwa", include_str!("../configs/ohmic_weak_rwa.toml")),
    ("thermal_two_mode", include_str!("../configs/thermal_two_mode.toml")),
    ("coupling_sweep", include_str!("../configs/coupling_sweep.toml")),
];

impl FromStr for SimulationConfig {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(toml::from_str(s)?)
    }
}

impl SimulationConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// The star spectral density, resolving a named preset.
    pub fn spectral(&self) -> Result<Option<SpectralPreset>, CliError> {
        match &self.network {
            NetworkConfig::Star { preset, spectral, .. } => match (preset, spectral) {
                (Some(_), Some(_)) => Err(CliError::Config("network: give either `preset` or `spectral`, not both".into())),
                (None, None) => Err(CliError::Config("network: star needs `preset` or `spectral`".into())),
                (Some(name), None) => lookup_preset(name)
                    .map(Some)
                    .ok_or_else(|| CliError::Config(format!("network: unknown preset `{name}`"))),
                (None, Some(s)) => Ok(Some(*s)),
            },
            _ => Ok(None),
        }
    }

    /// Structural checks that need no numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed must fit a TOML integer, got {}", self.seed));
        }
        if !(self.time.t_max > 0.0) {
            return bad(format!("time.t_max must be positive, got {}", self.time.t_max));
        }
        if self.time.n_points < 2 {
            return bad(format!("time.n_points must be at least 2, got {}", self.time.n_points));
        }
        let t = &self.tolerances;
        if !(t.rtol > 0.0 && t.atol > 0.0 && t.markov >= 0.0 && t.kernel_step_factor > 0.0 && t.kernel_levels >= 1) {
            return bad("tolerances must be positive".into());
        }
        if let Some(p) = self.spectral()? {
            p.validate().map_err(|e| CliError::Config(format!("network.spectral: {e}")))?;
        }
        if let NetworkConfig::Random { n_system, n_reservoir, strength } = self.network {
            if n_system == 0 || n_reservoir == 0 || !(strength > 0.0) {
                return bad("network: random networks need n_system, n_reservoir ≥ 1 and strength > 0".into());
            }
        }
        if self.backend == Backend::Kernel {
            if self.mode == PropagationMode::Rwa {
                return bad("backend `kernel` covers the full dynamics only".into());
            }
            if !matches!(self.network, NetworkConfig::Star { .. }) {
                return bad("backend `kernel` needs a star network".into());
            }
        }
        if let ReservoirConfig::Thermal { temperature, n_bar } = &self.reservoir {
            if temperature.is_some() == n_bar.is_some() {
                return bad("reservoir: thermal needs exactly one of `temperature` or `n_bar`".into());
            }
        }
        if let Some(s) = &self.sweep {
            if !(s.window > 0.0 && s.window <= 1.0) {
                return bad(format!("sweep.window must lie in (0, 1], got {}", s.window));
            }
        }
        Ok(())
    }

    /// Returns a copy with `key` (a dotted path) set to `value`. The key must
    /// name a field already present in the serialized config, or a field of a
    /// table that exists.
    pub fn with_override(&self, key: &str, value: Value) -> Result<Self, CliError> {
        let mut root = Value::try_from(self).expect("config always serializes");
        let parts: Vec<&str> = key.split('.').collect();
        let (last, path) = parts.split_last().ok_or_else(|| CliError::Config("empty override key".into()))?;
        let mut node = &mut root;
        for p in path {
            node = node
                .get_mut(*p)
                .ok_or_else(|| CliError::Config(format!("override `{key}`: no table `{p}`")))?;
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: parent is not a table")))?;
        // integers given for float fields
        let value = match (table.get(*last), value) {
            (Some(Value::Float(_)), Value::Integer(i)) => Value::Float(i as f64),
            (_, v) => v,
        };
        table.insert((*last).to_string(), value);
        let out: Self = root.try_into().map_err(|e: toml::de::Error| CliError::Config(format!("override `{key}`: {e}")))?;
        Ok(out)
    }

    /// Applies a `key=value` override string; the value is read as a TOML
    /// value and falls back to a bare string.
    pub fn apply_override(&self, spec: &str) -> Result<Self, CliError> {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{spec}` is not key=value")))?;
        let value = parse_value(raw.trim());
        self.with_override(key.trim(), value)
    }
}

fn parse_value(raw: &str) -> Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: Value,
    }
    toml::from_str::<Wrap>(&format!("v = {raw}")).map(|w| w.v).unwrap_or_else(|_| Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_parse_and_round_trip() {
        for (name, text) in BUNDLED {
            let c: SimulationConfig = text.parse().unwrap_or_else(|e| panic!("{name}: {e}"));
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            let again: SimulationConfig = c.to_toml().parse().unwrap();
            assert_eq!(c, again, "{name}");
        }
    }

    #[test]
    fn defaults_fill_missing_tables() {
        let c: SimulationConfig = "[network]\nkind = \"star\"\npreset = \"ohmic_weak\"\n".parse().unwrap();
        assert_eq!(c.time, TimeConfig::default());
        assert_eq!(c.reservoir, ReservoirConfig::ZeroTemperature);
        assert_eq!(c.backend, Backend::Ode);
        assert_eq!(c.mode, PropagationMode::Full);
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let c: SimulationConfig = BUNDLED[0].1.parse().unwrap();
        let c = c.apply_override("network.spectral.coupling=0.1").unwrap();
        match c.spectral().unwrap().unwrap().family {
            SpectralFamily::SingleMode { coupling, .. } => assert_eq!(coupling, 0.1),
            f => panic!("{f:?}"),
        }
        let c = c.apply_override("mode=rwa").unwrap();
        assert_eq!(c.mode, PropagationMode::Rwa);
        let c = c.apply_override("time.t_max=3").unwrap();
        assert_eq!(c.time.t_max, 3.0);
        assert!(c.apply_override("time.nope.x=1").is_err());
        assert!(c.apply_override("time.t_max=\"soon\"").is_err());
    }

    #[test]
    fn structural_errors() {
        let base: SimulationConfig = BUNDLED[0].1.parse().unwrap();
        assert!(base.apply_override("time.n_points=1").unwrap().validate().is_err());
        assert!(base.apply_override("time.t_max=-1.0").unwrap().validate().is_err());
        assert!(base.apply_override("network.preset=\"nope\"").unwrap().validate().is_err());
        assert!("[network]\nkind = \"star\"\nbogus = 1\n".parse::<SimulationConfig>().is_err());
    }
}
