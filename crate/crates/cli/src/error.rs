use carleman_lab::Error;
use thiserror::Error;

/// Exit status of a successful run.
pub const EXIT_OK: i32 = 0;
/// I/O or serialization failure.
pub const EXIT_IO: i32 = 1;
/// Configuration or hypothesis violation, detected before or during setup.
pub const EXIT_CONFIG: i32 = 2;
/// Numerical failure of a solve, a fit or an iteration.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl CliError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Serialize(_) => EXIT_IO,
            CliError::Core(e) => match e {
                Error::UnstableSolution { .. }
                | Error::LinearSolveFailure(_)
                | Error::ResidualTooLarge { .. }
                | Error::MaxIterationsExceeded { .. }
                | Error::FitUnderdetermined { .. } => EXIT_NUMERICAL,
                _ => EXIT_CONFIG,
            },
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Serialize(e.to_string())
    }
}
