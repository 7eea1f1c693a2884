use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid sizes, names or settings supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),
    /// An API was used outside its contract (wrong set size, detached scalar, ...).
    #[error("usage error: {0}")]
    Usage(String),
    /// A NaN or infinity appeared during evaluation.
    #[error("numerical error in {context}{}", layer.map(|l| format!(" (layer {l})")).unwrap_or_default())]
    NonFinite {
        context: String,
        layer: Option<usize>,
    },
    /// An optimizer produced a non-finite loss; `last_theta` is the last
    /// iterate whose loss was finite (or the starting point).
    #[error("optimizer diverged: {context}")]
    Diverged {
        context: String,
        last_theta: Vec<f64>,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn non_finite(context: impl Into<String>, layer: Option<usize>) -> Self {
        Error::NonFinite {
            context: context.into(),
            layer,
        }
    }

    /// True for errors caused by NaN/inf, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Diverged { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
