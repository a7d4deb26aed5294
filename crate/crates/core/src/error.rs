use std::path::PathBuf;
use std::sync::Arc;

use crate::manifest::ManifestErrors;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value violates a documented domain invariant.
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },

    #[error("room cannot achieve requested T60 of {t60} s")]
    UnreachableT60 { t60: f64 },

    /// Image-source enumeration would exceed the configured budget.
    #[error("image count {required} exceeds budget of {budget}")]
    ImageBudget { required: u64, budget: u64 },

    #[error("sweep not found: peak is {peak_db:.1} dB over median energy (need {required_db:.1} dB)")]
    SweepNotFound { peak_db: f64, required_db: f64 },

    #[error("no signal: {0}")]
    NoSignal(&'static str),

    #[error("insufficient decay range: curve reaches {reached_db:.1} dB, need {required_db:.1} dB")]
    InsufficientDecay { reached_db: f64, required_db: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid manifest:\n{0}")]
    Manifest(ManifestErrors),

    /// A failure cached and handed to several consumers.
    #[error("{0}")]
    Shared(Arc<Error>),
}

impl Error {
    pub fn validation(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            what,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
