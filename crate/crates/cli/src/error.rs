use std::path::{Path, PathBuf};

use thiserror::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_STATISTICS: u8 = 4;
pub const EXIT_IO: u8 = 5;
pub const EXIT_CHECK_FAILED: u8 = 6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] ddxy::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0} oracle check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use ddxy::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::ChecksFailed(_) => EXIT_CHECK_FAILED,
            CliError::Core(e) => match e {
                E::Parameter(_) | E::Dimension { .. } | E::TooLarge { .. } | E::Coupling(_) => {
                    EXIT_CONFIG
                }
                E::InsufficientStatistics(_) | E::TooFewSwitches { .. } => EXIT_STATISTICS,
                E::Integration { .. }
                | E::Eigen(_)
                | E::Degenerate { .. }
                | E::NotStationary { .. }
                | E::JumpStep { .. } => EXIT_NUMERICAL,
            },
        }
    }
}
