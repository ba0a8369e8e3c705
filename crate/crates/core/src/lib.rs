//! Exact dynamics of bosonic oscillators coupled to a harmonic reservoir.
//!
//! The pipeline runs from a position-coupled [`network::NetworkSpec`] to the
//! mode-picture [`network::RenormalizedNetwork`], the Bogoliubov propagator
//! ([`propagator`], [`kernel`]), the reduced noise functions ([`reduced`]),
//! evolved Gaussian states ([`gaussian`]) and, for one system mode, the exact
//! time-local master equation ([`master`]).

pub mod error;
pub mod gaussian;
pub mod kernel;
pub mod master;
pub mod network;
pub mod ode;
pub mod propagator;
pub mod quad;
pub mod reduced;
pub mod spectral;

pub use error::{Error, Result};
pub use gaussian::{GaussianState, SingleModeGaussian, VacuumDistortion};
pub use kernel::{evolve_single_mode_kernel, memory_kernel, KernelOptions, KernelSolution, KernelSpec};
pub use master::{
    extract_coefficients, lindblad_diagonalize, markovianity_report, Classification, LindbladForm,
    MarkovianityReport, MasterCoefficients,
};
pub use network::{renormalize, validate, NetworkSpec, RenormalizedNetwork, StarParams, ValidationReport};
pub use ode::OdeOptions;
pub use propagator::{evolve_uv, normal_mode_oracle, NormalModes, PropagationMode, RowSelection, UVTrajectory};
pub use reduced::{noise_kernels, NoiseKernels, ReservoirMoments};
pub use spectral::{SpectralFamily, SpectralPreset};
