use std::path::PathBuf;

/// Errors produced anywhere in the detection stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite numeric input: {0}")]
    NumericInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("window too short: {len} samples for kernel of size {kernel}")]
    WindowTooShort { len: usize, kernel: usize },

    #[error("invalid state: {0}")]
    State(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    TrainingDivergence { epoch: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("ingestion error at row {row}: {reason}")]
    Ingestion { row: usize, reason: String },

    #[error("time {t} is inside the warm-up period (first detectable time is {first})")]
    WarmUp { t: usize, first: usize },

    #[error("pipeline order violated: {0}")]
    PipelineOrder(String),

    #[error("adaptation failed on section {section}: {reason}; model rolled back")]
    AdaptationFailure { section: usize, reason: String },

    #[error("model comparison failed: {0}")]
    Comparison(String),

    #[error("attack script error: {0}")]
    Script(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("dataset not found at {path}: {hint}")]
    MissingDataset { path: PathBuf, hint: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
