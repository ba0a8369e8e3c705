//! Config-driven front end: TOML configs, pipeline runs, sweeps and CSV/JSON export.

pub mod config;
pub mod error;
pub mod run;
pub mod sweep;

pub use config::SimulationConfig;
pub use error::{CliError, Stage};
