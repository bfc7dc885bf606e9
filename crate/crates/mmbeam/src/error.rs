use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] mmbeam_core::Error),
    #[error("summary needs exhaustive-search rows as a baseline")]
    MissingBaseline,
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the CLI: 2 for configuration problems, 3 when
    /// a search exceeds the combination cap, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use mmbeam_core::Error as E;
        match self {
            Self::Config(_) | Self::Parse { .. } => 2,
            Self::Core(E::ResourceCap { .. }) => 3,
            Self::Core(
                E::InvalidConfig(_)
                | E::InvalidGeometry(_)
                | E::InvalidCodebook(_)
                | E::UnsupportedSize { .. }
                | E::POutOfRange { .. }
                | E::LayoutMismatch(_),
            ) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
