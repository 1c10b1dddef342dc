use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An iterative routine hit its cap or produced a non-finite value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Input outside the domain of the operation (zero matrix, bad label, empty split, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke a documented precondition (e.g. passing a `p` that is not the forward output).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("failed to load task `{task}`{}: {message}", row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    Load {
        task: String,
        row: Option<usize>,
        message: String,
    },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint incompatible with bundle: {0}")]
    Incompatible(String),

    #[error(
        "non-finite loss at step {step} (task {task}): data loss {data_loss}, regularizer {regularizer}"
    )]
    NonFiniteLoss {
        step: u64,
        task: usize,
        data_loss: f64,
        regularizer: f64,
    },

    #[error("refusing to write into non-empty directory {0} (use --force)")]
    OutputExists(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used for the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Numerical(_) => "numerical",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Contract(_) => "contract",
            Error::Load { .. } => "load",
            Error::Checkpoint(_) => "checkpoint",
            Error::Incompatible(_) => "incompatible",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::OutputExists(_) => "output_exists",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
