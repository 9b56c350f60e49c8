use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition (bad index, shrinking
    /// action set, non-finite input).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Experiment configuration failed to parse or validate.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    /// Malformed input data, e.g. a CSV column fed to the detector trace.
    #[error("input error: {0}")]
    Input(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A trial aborted because the schedule and agent disagreed.
    #[error("trial {trial} ({agent}) aborted: {message}")]
    Trial {
        trial: usize,
        agent: String,
        message: String,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
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
