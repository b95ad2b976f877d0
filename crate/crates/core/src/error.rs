use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("non-constant stride: {0}")]
    Stride(String),

    #[error("unknown variable abbreviation `{0}`")]
    UnknownVariable(String),

    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("dimension mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("cannot fill missing values: {0}")]
    Fill(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("invalid window: {0}")]
    Window(String),

    #[error("config key `{key}`: {detail}")]
    Config { key: String, detail: String },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("encoder: {0}")]
    Encoder(String),

    #[error("pca: {0}")]
    Pca(String),

    #[error("heatwave definition: {0}")]
    Heatwave(String),

    #[error("evaluation: {0}")]
    Eval(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad inputs rather than failures during a run.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io { .. } | Error::Divergence { .. } | Error::NonFinite(_)
        )
    }
}
