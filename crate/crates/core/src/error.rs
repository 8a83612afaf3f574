use std::path::PathBuf;

/// Error type shared by every stage of the pipeline.
///
/// Variants map onto the two user-facing failure classes: everything except
/// [`Error::Internal`] is a user/data problem (exit code 1), `Internal` is a
/// broken invariant inside the pipeline itself (exit code 2).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file contents (bad magic, unsupported bit depth, ...).
    #[error("format error: {0}")]
    Format(String),

    /// Structurally valid header but inconsistent payload.
    #[error("corrupt data: {0}")]
    Corrupt(String),

    /// Valid files whose contents violate dataset-level contracts.
    #[error("data error: {0}")]
    Data(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    /// Requested operation the receiving component cannot perform,
    /// e.g. input gradients from a logit-replay model.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 for user/data errors, 2 for
    /// internal invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
