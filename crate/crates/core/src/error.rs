use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("non-positive demand at row {row}")]
    NonPositiveDemand { row: usize },

    #[error("negative arrival at row {row}")]
    NegativeArrival { row: usize },

    #[error("duplicate task ({job_id}, {task_id}) at row {row}")]
    DuplicateTask {
        row: usize,
        job_id: String,
        task_id: String,
    },

    #[error("trace contains no tasks")]
    EmptyTrace,

    #[error("arrival span is zero, so the arrival rate is undefined")]
    ZeroSpan,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("simulation time overflow at {context}")]
    TimeOverflow { context: String },

    #[error("missing completion record for task index {task}")]
    MissingRecord { task: usize },

    #[error("run failed validation with {count} violation(s); first: {first}")]
    Validation { count: usize, first: String },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the CLI: 1 validation failure, 2 bad
    /// configuration or input, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } => 1,
            Error::Io { .. } => 3,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 3,
            _ => 2,
        }
    }
}
