use crate::smt::SmtError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error("unknown {group} field `{name}`")]
    Field { group: &'static str, name: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("replay rejected trace: {0}")]
    Replay(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn replay(msg: impl Into<String>) -> Self {
        Error::Replay(msg.into())
    }
}
