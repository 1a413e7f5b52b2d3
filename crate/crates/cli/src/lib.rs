//! Pipeline plumbing for the `mfa` command-line tool: configuration
//! ingestion, record and emission tables, artifact persistence, and the
//! subcommand implementations.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod emissions;
pub mod records;
pub mod sankey;

/// Process exit codes: 0 success, 2 configuration error, 3 numerical
/// failure, 4 missing upstream artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    ConfigError = 2,
    NumericalFailure = 3,
    MissingDependency = 4,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error:\n{0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("missing upstream artifact: {0}")]
    MissingArtifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::ConfigError,
            CliError::Numerical(_) => ExitCode::NumericalFailure,
            CliError::MissingArtifact(_) => ExitCode::MissingDependency,
            CliError::Io(_) | CliError::Other(_) => ExitCode::NumericalFailure,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
