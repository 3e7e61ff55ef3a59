use std::path::PathBuf;

use thiserror::Error;

/// Every failure the triage pipeline can report.
#[derive(Debug, Error)]
pub enum TriageError {
    #[error("{0}: not found")]
    NotFound(PathBuf),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    InvalidSpec(String),

    #[error("output directory {0} is not empty; refusing to overwrite")]
    OutputNotEmpty(PathBuf),

    #[error("no log files selected under {0}; nothing to classify")]
    EmptyBundle(PathBuf),

    #[error("no bytes found under {0}; reduction is undefined")]
    UndefinedReduction(PathBuf),

    #[error("vocabulary is empty: no token reaches min_df={min_df} across {docs} documents")]
    EmptyVocabulary { min_df: usize, docs: usize },

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("cannot stratify: class {class} has {count} instances, fewer than k={k}")]
    Stratification {
        class: String,
        count: usize,
        k: usize,
    },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    #[error("fold {fold}, {algorithm}: {source}")]
    Fold {
        fold: usize,
        algorithm: String,
        #[source]
        source: Box<TriageError>,
    },

    #[error("{path}: corrupt artifact ({reason})")]
    Corrupt { path: PathBuf, reason: String },

    #[error("{path}: unsupported {kind} format version {found} (this build reads version {supported})")]
    UnsupportedVersion {
        path: PathBuf,
        kind: String,
        found: u32,
        supported: u32,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl TriageError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            TriageError::NotFound(path)
        } else {
            TriageError::Io { path, source }
        }
    }

    /// True for errors caused by the caller's data or configuration rather
    /// than a defect in this crate.
    pub fn is_data_error(&self) -> bool {
        match self {
            TriageError::Serialization(_) => false,
            TriageError::Fold { source, .. } => source.is_data_error(),
            _ => true,
        }
    }
}

pub type Result<T, E = TriageError> = std::result::Result<T, E>;
