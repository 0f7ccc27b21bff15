use std::path::PathBuf;

use phonon_forge_core::Error as CoreError;

use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("{context}: {source}")]
    Physics {
        context: String,
        #[source]
        source: CoreError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for anything the user can fix in the config, 3 for failures of the
    /// numerics, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Physics { source, .. } if is_setup_error(source) => 2,
            CliError::Physics { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }
}

/// Core errors that reject the requested geometry or parameters rather than
/// report a numerical failure.
fn is_setup_error(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::InvalidParameter { .. }
            | CoreError::TweezerOutOfRange { .. }
            | CoreError::DuplicateTweezer { .. }
            | CoreError::MisalignedTweezers { .. }
            | CoreError::CavityOutOfRange { .. }
            | CoreError::InsufficientBath { .. }
            | CoreError::WindowTooNarrow { .. }
    )
}

/// Attach module context to core results.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Physics {
            context: what(),
            source,
        })
    }
}
