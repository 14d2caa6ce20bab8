use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("area {area} has no usable value for attribute `{attribute}`")]
    MissingAttribute { area: String, attribute: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("assignment does not cover variable `{0}`")]
    MissingVariable(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("exhaustive solve supports at most {cap} variables, model has {actual}")]
    TooManyVariables { cap: usize, actual: usize },

    #[error("constraint `{0}` is not a unit-coefficient `<= 1` constraint")]
    UnsupportedConstraint(String),

    #[error("member set is not connected")]
    Disconnected,

    #[error("selected move set violates {0}")]
    ConstraintViolation(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }
}
