use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("diff parse error at line {line}: {message}")]
    DiffParse { line: usize, message: String },

    #[error("line count mismatch: {diff_lines} != {msg_lines}")]
    LineCountMismatch { diff_lines: usize, msg_lines: usize },

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("vocabulary: {0}")]
    Vocabulary(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("unsupported checkpoint version: found {found}, expected {expected}")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad input or configuration rather than a
    /// fault inside the toolkit.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Shape(_) | Error::Diverged { .. })
    }
}
