use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the toolkit.
///
/// Variants are grouped by how a caller is expected to react: input and
/// file problems are validation failures, everything the numerics can
/// produce is a numeric failure. See [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("linear solve failed: relative residual {residual:.3e} exceeds {limit:.1e}")]
    Solver { residual: f64, limit: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("feature error: {0}")]
    Feature(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("render error: non-finite values in series {0:?}")]
    Render(Vec<String>),

    #[error("schema version mismatch: found {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("checksum mismatch for {0}")]
    Checksum(PathBuf),

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("manifest validation failed: {0}")]
    Manifest(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Wraps the error with a short description of what was being done.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code for the command-line tool: 2 for validation
    /// failures, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Assembly(_)
            | Error::Solver { .. }
            | Error::Calibration(_)
            | Error::Feature(_)
            | Error::Training(_)
            | Error::Render(_) => 3,
            _ => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_root_cause() {
        let e = Error::Solver {
            residual: 1e-3,
            limit: 1e-8,
        }
        .context("specimen 3, step 5");
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("specimen 3, step 5"));
        assert_eq!(Error::domain("bad").exit_code(), 2);
        assert_eq!(Error::Checksum("a.csv".into()).exit_code(), 2);
    }
}
