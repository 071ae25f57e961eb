//! Crate-wide error type.

use crate::types::ServiceId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an operation's arguments was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An abstract service has no candidate provider (all cells absent).
    #[error("no provider for abstract service {service}")]
    NoProvider { service: ServiceId },

    /// Scenario configuration failed validation. Each entry names one
    /// offending field.
    #[error("invalid scenario config:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),

    /// A trace file could not be parsed past the named line.
    #[error("trace parse error at line {line}: {reason} (last valid record: {})",
            .last_valid.as_deref().unwrap_or("none"))]
    TraceParse {
        line: usize,
        reason: String,
        last_valid: Option<String>,
    },

    /// A batch run failed for one (seed, method) pair.
    #[error("run failed for seed {seed}, method {method}: {source}")]
    RunFailed {
        seed: u64,
        method: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
