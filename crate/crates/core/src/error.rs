use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("mode error: {0}")]
    Mode(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("index {index} out of range for {len} pixels")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("memory capacity {cap} exceeded: {current} + {requested} entries")]
    MemoryFull {
        cap: usize,
        current: usize,
        requested: usize,
    },

    #[error("unknown {kind} strategy `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
