//! Config → pipeline → artifact bundle.

use std::fs;
use std::path::{Path, PathBuf};

use exactdyn::gaussian::{evolve_state_series, vacuum_distortion, GaussianState, SingleModeGaussian, VacuumDistortion};
use exactdyn::kernel::{evolve_single_mode_kernel, KernelOptions, KernelSpec};
use exactdyn::master::{extract_coefficients, lindblad_diagonalize, markovianity_report_with_tolerance};
use exactdyn::network::Violation;
use exactdyn::reduced::noise_kernels;
use exactdyn::{
    evolve_uv, renormalize, validate, Classification, LindbladForm, MarkovianityReport, MasterCoefficients, NetworkSpec,
    NoiseKernels, NormalModes, OdeOptions, PropagationMode, RenormalizedNetwork, ReservoirMoments, RowSelection,
    UVTrajectory,
};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Backend, NetworkConfig, ReservoirConfig, SimulationConfig};
use crate::error::{AtStage, CliError, Stage};

/// Trailing fraction of the grid averaged for the rate summary when the
/// config has no `[sweep]` table.
pub const DEFAULT_WINDOW: f64 = 0.25;

/// Network in both pictures plus the recurrence horizon of a discretized band.
#[derive(Debug, Clone)]
pub struct BuiltNetwork {
    pub spec: NetworkSpec,
    pub network: RenormalizedNetwork,
    pub horizon: f64,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub times: Vec<f64>,
    pub built: BuiltNetwork,
    pub reservoir: ReservoirMoments,
    pub uv: UVTrajectory,
    pub kernels: NoiseKernels,
    pub states: Vec<GaussianState>,
    pub distortion: Option<VacuumDistortion>,
    pub coefficients: Option<MasterCoefficients>,
    pub lindblad: Option<LindbladForm>,
    pub markovianity: Option<MarkovianityReport>,
}

fn check_physical(spec: &NetworkSpec) -> Result<(), CliError> {
    let report = validate(spec);
    match report.violations.first() {
        None => Ok(()),
        Some(Violation::NotPositiveSemidefinite { min_eigenvalue }) => {
            Err(exactdyn::Error::NotPositiveSemidefinite(*min_eigenvalue)).at(Stage::NetworkModel)
        }
        Some(_) => Err(exactdyn::Error::InvalidNetwork(format!("{:?}", report.violations))).at(Stage::NetworkModel),
    }
}

fn random_network(rng: &mut ChaCha8Rng, n_system: usize, n_reservoir: usize, strength: f64) -> Result<NetworkSpec, CliError> {
    let n = n_system + n_reservoir;
    for _ in 0..1000 {
        let masses = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let bare_frequencies = (0..n).map(|_| rng.gen_range(0.6..1.8)).collect();
        let mut couplings = vec![vec![0.0; n]; n];
        for k in 0..n {
            for j in k + 1..n {
                let x = rng.gen_range(-strength..strength);
                couplings[k][j] = x;
                couplings[j][k] = x;
            }
        }
        let spec = NetworkSpec { n_system, masses, bare_frequencies, couplings };
        if validate(&spec).is_physical() {
            return Ok(spec);
        }
    }
    Err(CliError::Config(format!("network: no physical random network found at strength {strength}")))
}

pub fn build_network(config: &SimulationConfig) -> Result<BuiltNetwork, CliError> {
    match &config.network {
        NetworkConfig::Star { system_frequency, .. } => {
            let preset = config.spectral()?.expect("star networks carry a spectral density");
            let bath = preset.discretize().at(Stage::NetworkModel)?;
            let spec = bath.network_spec(*system_frequency).at(Stage::NetworkModel)?;
            check_physical(&spec)?;
            Ok(BuiltNetwork { spec, network: bath.network(*system_frequency), horizon: bath.validity_horizon() })
        }
        NetworkConfig::Explicit(spec) => {
            check_physical(spec)?;
            let network = renormalize(spec).at(Stage::NetworkModel)?;
            Ok(BuiltNetwork { spec: spec.clone(), network, horizon: f64::INFINITY })
        }
        NetworkConfig::Random { n_system, n_reservoir, strength } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let spec = random_network(&mut rng, *n_system, *n_reservoir, *strength)?;
            let network = renormalize(&spec).at(Stage::NetworkModel)?;
            Ok(BuiltNetwork { spec, network, horizon: f64::INFINITY })
        }
    }
}

pub fn reservoir_moments(config: &SimulationConfig, net: &RenormalizedNetwork) -> ReservoirMoments {
    let freqs = &net.frequencies[net.n_system..];
    let n = freqs.len();
    match &config.reservoir {
        ReservoirConfig::ZeroTemperature => ReservoirMoments::zero_temperature(n),
        ReservoirConfig::Thermal { temperature: Some(t), .. } => ReservoirMoments::thermal(freqs, *t),
        ReservoirConfig::Thermal { n_bar, .. } => ReservoirMoments::thermal_occupations(n_bar.as_deref().unwrap_or(&[])),
        ReservoirConfig::Squeezed { n_bar, r, phi } => {
            let zeros = vec![0.0; n];
            ReservoirMoments::squeezed(n_bar.as_deref().unwrap_or(&zeros), *r, *phi)
        }
    }
}

fn initial_state(config: &SimulationConfig, n_system: usize) -> Result<GaussianState, CliError> {
    if config.initial_state.is_empty() {
        return Ok(GaussianState::vacuum(n_system));
    }
    if config.initial_state.len() != n_system {
        return Err(CliError::Config(format!(
            "initial_state lists {} modes for {n_system} system modes",
            config.initial_state.len()
        )));
    }
    let modes: Vec<SingleModeGaussian> = config
        .initial_state
        .iter()
        .map(|m| SingleModeGaussian {
            displacement: C::new(m.displacement[0], m.displacement[1]),
            n_bar: m.n_bar,
            squeeze: m.squeeze,
            squeeze_phase: m.squeeze_phase,
        })
        .collect();
    Ok(GaussianState::squeezed_thermal(&modes))
}

/// Runs the pipeline. `need_coefficients` forces the master-equation stage
/// regardless of the requested outputs.
pub fn simulate(config: &SimulationConfig, need_coefficients: bool) -> Result<Simulation, CliError> {
    config.validate()?;
    let built = build_network(config)?;
    if config.time.t_max > built.horizon && !config.time.allow_beyond_horizon {
        return Err(CliError::Config(format!(
            "time.t_max = {} exceeds the discretization horizon {:.6e}; refine the band or set time.allow_beyond_horizon",
            config.time.t_max, built.horizon
        )));
    }
    let net = &built.network;
    let times = config.time.grid();
    let tol = &config.tolerances;
    let opts = OdeOptions { rtol: tol.rtol, atol: tol.atol, ..OdeOptions::default() };
    let uv = match config.backend {
        Backend::Ode => evolve_uv(net, &times, RowSelection::SystemOnly, config.mode, &opts).at(Stage::Propagator)?,
        Backend::Kernel => {
            let spec = KernelSpec::from_star(net).at(Stage::Propagator)?;
            let kopts = KernelOptions { step_factor: tol.kernel_step_factor, levels: tol.kernel_levels };
            evolve_single_mode_kernel(&spec, &times, &kopts).at(Stage::Propagator)?.trajectory()
        }
        Backend::Oracle => {
            if config.mode == PropagationMode::Rwa {
                return Err(CliError::Config("backend `oracle` covers the full dynamics only".into()));
            }
            NormalModes::new(&built.spec).at(Stage::Propagator)?.trajectory(&times).at(Stage::Propagator)?
        }
    };
    let reservoir = reservoir_moments(config, net);
    let kernels = noise_kernels(&uv, &reservoir).at(Stage::ReducedDynamics)?;
    let state0 = initial_state(config, net.n_system)?;
    let states = if config.outputs.state {
        evolve_state_series(&state0, &uv, &kernels).at(Stage::GaussianStates)?
    } else {
        Vec::new()
    };
    let distortion = if config.outputs.distortion {
        Some(vacuum_distortion(&uv, &kernels).at(Stage::GaussianStates)?)
    } else {
        None
    };
    let (coefficients, lindblad, markovianity) =
        if need_coefficients || config.outputs.coefficients || config.outputs.markovianity {
            let c = extract_coefficients(&uv, net, &reservoir).at(Stage::MasterEquation)?;
            let l = lindblad_diagonalize(&c);
            let m = markovianity_report_with_tolerance(&c, config.mode == PropagationMode::Rwa, tol.markov);
            (Some(c), Some(l), Some(m))
        } else {
            (None, None, None)
        };
    Ok(Simulation { times, built, reservoir, uv, kernels, states, distortion, coefficients, lindblad, markovianity })
}

/// Per-run rate summary shared by `run` and `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub classification: Classification,
    pub first_violation: Option<f64>,
    pub max_abs_eta: f64,
    /// Means over the trailing window of the grid, masked points skipped.
    pub mean_gamma1: f64,
    pub mean_gamma2: f64,
    pub window: f64,
}

impl Simulation {
    pub fn summary(&self, window: f64) -> Option<Summary> {
        let c = self.coefficients.as_ref()?;
        let m = self.markovianity.as_ref()?;
        let n = c.len();
        let start = ((1.0 - window) * (n - 1) as f64).floor() as usize;
        let live: Vec<usize> = (start..n).filter(|&i| !c.masked[i]).collect();
        let mean = |x: &[f64]| live.iter().map(|&i| x[i]).sum::<f64>() / live.len() as f64;
        let max_abs_eta = (0..n).filter(|&i| !c.masked[i]).map(|i| c.eta[i].norm()).fold(0.0, f64::max);
        Some(Summary {
            classification: m.classification,
            first_violation: m.first_violation,
            max_abs_eta,
            mean_gamma1: mean(&c.gamma1),
            mean_gamma2: mean(&c.gamma2),
            window,
        })
    }
}

pub(crate) fn num(x: f64) -> String {
    // fold -0 into 0
    format!("{:e}", x + 0.0)
}

fn write_csv(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

fn uv_csv(sim: &Simulation, path: &Path) -> Result<(), CliError> {
    let m = sim.uv.n_system;
    let n = sim.uv.n_modes();
    let mut header = vec!["t".to_string()];
    for k in 1..=m {
        for j in 1..=n {
            header.extend([format!("re_U_{k}_{j}"), format!("im_U_{k}_{j}"), format!("re_V_{k}_{j}"), format!("im_V_{k}_{j}")]);
        }
    }
    let rows = (0..sim.uv.len()).map(|i| {
        let (u, v) = (&sim.uv.u[i], &sim.uv.v[i]);
        let mut r = vec![num(sim.times[i])];
        for k in 0..m {
            for j in 0..n {
                r.extend([num(u[(k, j)].re), num(u[(k, j)].im), num(v[(k, j)].re), num(v[(k, j)].im)]);
            }
        }
        r
    });
    write_csv(path, header, rows)
}

fn noise_csv(sim: &Simulation, path: &Path) -> Result<(), CliError> {
    let m = sim.uv.n_system;
    let k = &sim.kernels;
    let names = ["A0", "Ath", "B0", "Bth"];
    let mut header = vec!["t".to_string()];
    for a in 1..=m {
        for b in 1..=m {
            for name in names {
                header.extend([format!("re_{name}_{a}_{b}"), format!("im_{name}_{a}_{b}")]);
            }
        }
    }
    let rows = (0..k.len()).map(|i| {
        let mats = [&k.a0[i], &k.ath[i], &k.b0[i], &k.bth[i]];
        let mut r = vec![num(k.times[i])];
        for a in 0..m {
            for b in 0..m {
                for mat in mats {
                    r.extend([num(mat[(a, b)].re), num(mat[(a, b)].im)]);
                }
            }
        }
        r
    });
    write_csv(path, header, rows)
}

pub const COEFFICIENT_COLUMNS: [&str; 13] = [
    "t", "omega", "gamma1", "gamma2", "re_xi", "im_xi", "re_eta", "im_eta", "lambda1", "lambda2", "theta", "markov_ineq1",
    "markov_ineq2",
];

fn coefficients_csv(sim: &Simulation, path: &Path) -> Result<(), CliError> {
    let c = sim.coefficients.as_ref().expect("coefficients computed");
    let l = sim.lindblad.as_ref().expect("lindblad form computed");
    let m = sim.markovianity.as_ref().expect("report computed");
    let rows = (0..c.len()).map(|i| {
        [
            c.times[i],
            c.omega[i],
            c.gamma1[i],
            c.gamma2[i],
            c.xi[i].re,
            c.xi[i].im,
            c.eta[i].re,
            c.eta[i].im,
            l.lambda1[i],
            l.lambda2[i],
            l.theta[i],
            m.ineq1[i],
            m.ineq2[i],
        ]
        .into_iter()
        .map(num)
        .collect()
    });
    write_csv(path, COEFFICIENT_COLUMNS.iter().map(|s| s.to_string()).collect(), rows)
}

fn state_csv(sim: &Simulation, path: &Path) -> Result<(), CliError> {
    let m = sim.uv.n_system;
    let mut header = vec!["t".to_string()];
    for k in 1..=m {
        header.extend([format!("re_alpha_{k}"), format!("im_alpha_{k}")]);
    }
    for a in 1..=2 * m {
        for b in a..=2 * m {
            header.push(format!("sigma_{a}_{b}"));
        }
    }
    let rows = sim.states.iter().enumerate().map(|(i, s)| {
        let mut r = vec![num(sim.times[i])];
        for z in s.mean.iter() {
            r.extend([num(z.re), num(z.im)]);
        }
        for a in 0..2 * m {
            for b in a..2 * m {
                r.push(num(s.covariance[(a, b)]));
            }
        }
        r
    });
    write_csv(path, header, rows)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn config_hash(config: &SimulationConfig) -> String {
    hex(&Sha256::digest(config.to_toml().as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_sha256: String,
    tolerances: &'a crate::config::Tolerances,
    mode: PropagationMode,
    backend: Backend,
    n_points: usize,
    /// `null` when the band has no recurrence (single mode, explicit networks).
    horizon: Option<f64>,
    files: Vec<FileEntry>,
    config: String,
}

pub(crate) fn write_manifest(
    out: &Path,
    command: &str,
    config: &SimulationConfig,
    horizon: f64,
    files: &[PathBuf],
) -> Result<(), CliError> {
    let files = files
        .iter()
        .map(|p| {
            Ok(FileEntry {
                name: p.file_name().unwrap().to_string_lossy().into_owned(),
                sha256: hex(&Sha256::digest(fs::read(p)?)),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = Manifest {
        tool: "exactdyn",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_sha256: config_hash(config),
        tolerances: &config.tolerances,
        mode: config.mode,
        backend: config.backend,
        n_points: config.time.n_points,
        horizon: horizon.is_finite().then_some(horizon),
        files,
        config: config.to_toml(),
    };
    write_json(&out.join("manifest.json"), &manifest)
}

/// Runs one config and writes every requested product plus `manifest.json`
/// into `out`. Returns the written paths, manifest last.
pub fn run(config: &SimulationConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let sim = simulate(config, false)?;
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&Path) -> Result<(), CliError>| -> Result<(), CliError> {
        let p = out.join(name);
        f(&p)?;
        files.push(p);
        Ok(())
    };
    let o = config.outputs;
    if o.uv {
        emit("uv.csv", &|p| uv_csv(&sim, p))?;
    }
    if o.noise {
        emit("noise.csv", &|p| noise_csv(&sim, p))?;
    }
    if o.coefficients {
        emit("coefficients.csv", &|p| coefficients_csv(&sim, p))?;
    }
    if o.state {
        emit("state.csv", &|p| state_csv(&sim, p))?;
    }
    if let Some(d) = &sim.distortion {
        emit("distortion.json", &|p| write_json(p, d))?;
    }
    if o.markovianity {
        emit("markovianity.json", &|p| write_json(p, sim.markovianity.as_ref().unwrap()))?;
    }
    let window = config.sweep.as_ref().map_or(DEFAULT_WINDOW, |s| s.window);
    if let Some(s) = sim.summary(window) {
        emit("summary.json", &|p| write_json(p, &s))?;
    }
    write_manifest(out, "run", config, sim.built.horizon, &files)?;
    files.push(out.join("manifest.json"));
    Ok(files)
}
