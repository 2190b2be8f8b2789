use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("framing error: {what} expects {expected} entries, got {got}")]
    Framing {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("model error: {0}")]
    Model(String),

    #[error("numerical error: {what} is singular (condition estimate {cond_estimate:.3e})")]
    Singular { what: &'static str, cond_estimate: f64 },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("instance too large for exhaustive enumeration: {hypotheses} hypotheses exceeds the bound of {bound}")]
    TooLarge { hypotheses: f64, bound: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn framing(what: &'static str, expected: usize, got: usize) -> Self {
        Error::Framing {
            what,
            expected,
            got,
        }
    }
}
