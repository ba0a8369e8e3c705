use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coupling matrix is not symmetric at ({0}, {1})")]
    AsymmetricCoupling(usize, usize),
    #[error("renormalized frequency of mode {mode} has non-positive square {value}")]
    NonPositiveRadicand { mode: usize, value: f64 },
    #[error("network is not physical: {0}")]
    InvalidNetwork(String),
    #[error("potential matrix is not positive semidefinite (smallest eigenvalue {0})")]
    NotPositiveSemidefinite(f64),
    #[error("coupling ({0}, {1}) is not on the star connecting mode 0 to the reservoir")]
    NonStarTopology(usize, usize),
    #[error("integrator failed at t = {t}: {reason}")]
    IntegratorFailure { t: f64, reason: String },
    #[error("time grid is not uniform (index {0})")]
    NonUniformGrid(usize),
    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("reservoir moments are unphysical: {0}")]
    UnphysicalMoments(String),
    #[error("initial state is unphysical (margin {0})")]
    UnphysicalInput(f64),
    #[error("empty frequency band [{0}, {1}]")]
    EmptyBand(f64, f64),
    #[error("invalid spectral preset: {0}")]
    InvalidPreset(String),
    #[error("map is degenerate at t = {0} (|U|² − |V|² below threshold)")]
    DegenerateMap(f64),
    #[error("master-equation coefficients are only defined for a single system mode (got {0})")]
    MultiModeUnsupported(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
