use std::path::PathBuf;

use thiserror::Error;

use crate::dynamics::Channel;

pub type Result<T> = std::result::Result<T, HlabError>;

#[derive(Debug, Error)]
pub enum HlabError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt payload: {0}")]
    Corruption(String),

    #[error("invalid {channel} value at epoch {epoch}, sample {sample}: {reason}")]
    Validation {
        channel: &'static str,
        epoch: usize,
        sample: usize,
        reason: &'static str,
    },

    #[error("dynamics log has no {0} channel")]
    MissingChannel(Channel),

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("class {class} has no samples")]
    DegenerateClass { class: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "alpha {alpha} drives the ratio of class {class} to {value}; largest safe alpha is below {max_safe_alpha}"
    )]
    OverScaling {
        class: usize,
        alpha: f64,
        value: f64,
        max_safe_alpha: f64,
    },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("curve has no elbow")]
    NoElbow,

    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HlabError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HlabError::Io {
            path: path.into(),
            source,
        }
    }
}
