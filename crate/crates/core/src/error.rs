use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A record violated the dataset schema.
    #[error("record {record}: {field}: {message}")]
    Schema {
        record: String,
        field: String,
        message: String,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid split: {0}")]
    Split(String),

    #[error("event {event_id}: no frame within span [{start_s}, {end_s}]")]
    NoFrameInSpan {
        event_id: String,
        start_s: f64,
        end_s: f64,
    },

    #[error("empty token sequence")]
    EmptyTokens,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("attention over an empty item set")]
    EmptyAttention,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("ranking: {0}")]
    Ranking(String),

    #[error("rationale: {0}")]
    Rationale(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn schema(record: &str, field: &str, message: impl Into<String>) -> Self {
        Error::Schema {
            record: record.to_string(),
            field: field.to_string(),
            message: message.into(),
        }
    }
}
