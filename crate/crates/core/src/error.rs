use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// A type invariant does not hold. The message names the entity.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("network is disconnected: {} components {components:?}", components.len())]
    Disconnected { components: Vec<Vec<u64>> },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("planning error: {0}")]
    Planning(String),

    #[error("regression error: {0}")]
    Fit(String),

    #[error("profile error: {0}")]
    Profile(String),

    #[error("comparison error: {0}")]
    Mismatch(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for failures of the optimization step rather than of the inputs.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::Solver(_))
    }
}
