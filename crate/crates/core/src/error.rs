use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A user-supplied parameter is outside its legal domain.
    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    /// An argument lies outside the domain of a numerical routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series or iteration did not reach the requested tolerance.
    #[error("tolerance error: {0}")]
    Tolerance(String),

    /// The model parameters admit no solution (e.g. F never crosses 1).
    #[error("model error: {0}")]
    Model(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("stiffness: {0}")]
    Stiffness(String),

    #[error("integration drift: {0}")]
    Drift(String),

    #[error("spectral error: {0}")]
    Spectral(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("seeding error: {0}")]
    Seeding(String),

    #[error("pmf table error: {0}")]
    Table(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 configuration, 3 numeric/tolerance, 4 model.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Input(_) | Error::Seeding(_) => 2,
            Error::Model(_) => 4,
            Error::Io { .. } | Error::Serde(_) => 1,
            Error::Domain(_)
            | Error::Tolerance(_)
            | Error::Singularity(_)
            | Error::Stiffness(_)
            | Error::Drift(_)
            | Error::Spectral(_)
            | Error::Truncation(_)
            | Error::Table(_) => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
