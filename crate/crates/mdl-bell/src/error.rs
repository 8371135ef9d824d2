//! Crate-wide error type.

/// Errors reported by the toolkit.
///
/// Construction-time validation keeps the numeric kernels panic-free: once a
/// value of a domain type exists, its invariants hold.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A state, table, or distribution fails its physicality checks.
    #[error("invalid state: {0}")]
    InvalidState(String),
    /// A tomography protocol cannot reconstruct a full density matrix.
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    /// Data values are structurally valid but mutually inconsistent.
    #[error("invalid data: {0}")]
    InvalidData(String),
    /// Counts carry no usable information for the requested estimate.
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    /// A bracketing search found no sign change over the parameter range.
    #[error("no threshold: {0}")]
    NoThreshold(String),
    /// A count table or sidecar failed to parse.
    #[error("parse error at row {row}, field `{field}`: {message}")]
    Parse {
        row: usize,
        field: String,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(row: usize, field: &str, message: impl Into<String>) -> Self {
        Error::Parse {
            row,
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
