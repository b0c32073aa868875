use brwldp_core::Error as CoreError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Core(#[from] CoreError),

    /// A checked property failed; the report has already been printed.
    #[error("{0}")]
    Violation(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Csv(_) => EXIT_CONFIG,
            CliError::Violation(_) => EXIT_VIOLATION,
            CliError::Core(e) => match e {
                CoreError::InvalidModel(_)
                | CoreError::ModelFile { .. }
                | CoreError::Assumption { .. }
                | CoreError::Domain(_) => EXIT_CONFIG,
                CoreError::Budget(_) | CoreError::NoReplicates(_) => EXIT_BUDGET,
                CoreError::Numerical(_) => EXIT_VIOLATION,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
