use std::path::PathBuf;

use thiserror::Error;

use crate::lcnn::LcnnModel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the arguments of an operation was violated.
    #[error("{0}")]
    Contract(String),

    #[error("grid dimensions overflow: {0}")]
    Size(String),

    /// Malformed or unsupported file content.
    #[error("{0}")]
    Format(String),

    /// File content parsed, but the decoded value breaks a type invariant.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("every spectral entry fell below the floor {floor:e}")]
    DegenerateSpectrum { floor: f64 },

    #[error("kernel spectrum magnitude {magnitude:e} is below 1e-12 with nsr = 0")]
    SingularSpectrum { magnitude: f64 },

    #[error("non-finite gradient at layer {layer}, tap {tap}")]
    NonFiniteGradient { layer: usize, tap: usize },

    /// Training produced a non-finite loss; carries the last finite model.
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    Diverged {
        epoch: usize,
        step: usize,
        last_good: Box<LcnnModel>,
    },

    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable code used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Contract(_) => "contract",
            Error::Size(_) => "size",
            Error::Format(_) => "format",
            Error::Invariant(_) => "invariant",
            Error::DegenerateSpectrum { .. } => "degenerate-spectrum",
            Error::SingularSpectrum { .. } => "singular-spectrum",
            Error::NonFiniteGradient { .. } => "numeric",
            Error::Diverged { .. } => "diverged",
            Error::Input(_) => "input",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}
