use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("no links left after positive-feedback filtering")]
    EmptyStream,

    #[error("inconsistent content catalog: {0}")]
    Consistency(String),

    #[error("arc event time {event_time} is later than evaluation time {now}")]
    TemporalCausality { event_time: i64, now: i64 },

    #[error("user {0} has no graph node and no trusted user with one")]
    ColdUser(String),

    #[error("no user could be evaluated in any time slice")]
    EmptyEvaluation,

    #[error("{0}")]
    Config(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
