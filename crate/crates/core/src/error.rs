use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed config: {0}")]
    Parse(String),

    /// Every violated invariant, in field order.
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error(
        "singular block Q_{level} (pivot {pivot:e}); chain is reducible or rates are degenerate"
    )]
    Singular { level: usize, pivot: f64 },

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    /// True for errors caused by the user's configuration rather than by numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Parse(_) | Error::Invalid(_))
    }
}
