use std::path::PathBuf;

/// Errors of the command-line layer. [`CliError::exit_code`] maps them onto
/// process exit statuses: 1 for bad input, 2 for failed computations.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    Config { path: String, line: usize, message: String },
    #[error("unknown config key `{key}` ({path}:{line})")]
    UnknownKey { path: String, line: usize, key: String },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("missing artifact {}", .0.display())]
    MissingArtifacts(PathBuf),
    #[error("malformed file {}: {message}", path.display())]
    Malformed { path: PathBuf, message: String },
    #[error("N={n} Γ={gamma}: realization {index} failed during {stage}: {source}")]
    Realization { n: usize, gamma: f64, index: usize, stage: &'static str, source: exciton_core::Error },
    #[error("computation failed: {0}")]
    Compute(#[from] exciton_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. }
            | CliError::UnknownKey { .. }
            | CliError::Validation(_)
            | CliError::MissingArtifacts(_)
            | CliError::Malformed { .. } => 1,
            CliError::Realization { .. } | CliError::Compute(_) | CliError::Io { .. } => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
