use fracburgers_core::Error as CoreError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// The scenario text could not be read as a scenario.
    #[error("{source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Core(#[from] CoreError),

    /// A prerequisite artifact is absent or malformed.
    #[error("{0}")]
    Artifact(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => EXIT_INVALID,
            CliError::Core(CoreError::Validation(_)) => EXIT_INVALID,
            CliError::Core(CoreError::Abort { .. } | CoreError::HorizonTooLong { .. }) => EXIT_ABORT,
            _ => EXIT_CHECK_FAILED,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
