use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid geohash {code:?}: {reason}")]
    InvalidGeohash { code: String, reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no active data: zero active minutes")]
    NoActiveData,

    #[error("no GPS fixes inside the night window")]
    NoNightData,

    #[error("no residents")]
    NoResidents,

    #[error("no data")]
    NoData,

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("invalid folds: {points} points cannot be split into {folds} folds")]
    InvalidFolds { points: usize, folds: usize },

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("unknown {kind} {name:?}; registered: {known}")]
    UnknownStrategy { kind: &'static str, name: String, known: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: u64, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }

    /// True for errors caused by bad user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
