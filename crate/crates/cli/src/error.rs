use thiserror::Error;

/// Everything that stops a command. The exit code follows from the variant.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Usage(String),

    #[error("method not applicable: {0}")]
    Mismatch(String),

    #[error("{0}")]
    Model(#[from] descr_switch::Error),

    /// A check ran and did not pass.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Model(descr_switch::Error::InconsistentInitialState { .. }) => 1,
            _ => 2,
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn field(path: impl Into<String>, message: impl std::fmt::Display) -> Self {
        CliError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
