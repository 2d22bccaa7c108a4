use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{source_name}: {message}")]
    Config { source_name: String, message: String },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: bclp_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image {path}: {reason}")]
    Image { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { source_name: source_name.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// 3 for numeric failures during a run, 2 for everything caused by the
    /// configuration or its inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core { source, .. } => match source {
                bclp_core::Error::NonFinite(_) | bclp_core::Error::MemoryLimit { .. } => 3,
                _ => 2,
            },
            _ => 2,
        }
    }
}

/// Attaches `context` to core errors.
pub trait Context<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, bclp_core::Error> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| CliError::Core { context: context(), source })
    }
}
