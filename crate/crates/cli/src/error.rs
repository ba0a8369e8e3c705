use std::fmt;

use thiserror::Error;

/// Pipeline stage that produced a runtime error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    NetworkModel,
    Propagator,
    ReducedDynamics,
    MasterEquation,
    GaussianStates,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::NetworkModel => "network-model",
            Stage::Propagator => "propagator",
            Stage::ReducedDynamics => "reduced-dynamics",
            Stage::MasterEquation => "master-equation",
            Stage::GaussianStates => "gaussian-states",
            Stage::Export => "export",
        })
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{stage}: {source}")]
    Stage { stage: Stage, source: exactdyn::Error },
    #[error("export: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for config errors, 2 for runtime errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parse(_) => 1,
            CliError::Stage { .. } | CliError::Io(_) => 2,
        }
    }
}

pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, CliError>;
}

impl<T> AtStage<T> for exactdyn::Result<T> {
    fn at(self, stage: Stage) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
