use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape {0:?}: {1}")]
    InvalidShape(Vec<usize>, &'static str),

    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("class {class} has zero samples")]
    DegenerateClass { class: usize },

    #[error("split error: {0}")]
    Split(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("decode error in {path} at byte {offset}: {message}")]
    Decode {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("ingest failed:\n{0}")]
    Ingest(IngestReport),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("undefined AUC: {0}")]
    UndefinedAuc(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn mismatch(op: &'static str, expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> Self {
        Error::ShapeMismatch {
            op,
            expected: format!("{expected:?}"),
            got: format!("{got:?}"),
        }
    }

    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }
}

/// Itemized list of dataset entries that could not be ingested.
#[derive(Debug, Default, Clone)]
pub struct IngestReport {
    pub failures: Vec<(String, String)>,
}

impl IngestReport {
    pub fn push(&mut self, what: impl Into<String>, why: impl Into<String>) {
        self.failures.push((what.into(), why.into()));
    }

    pub fn is_empty(&self) -> bool {
        self.failures.is_empty()
    }
}

impl std::fmt::Display for IngestReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (what, why) in &self.failures {
            writeln!(f, "  {what}: {why}")?;
        }
        Ok(())
    }
}
