use thiserror::Error;

/// Errors raised by graph construction, kernel iteration and the estimate checks.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("resource bound exceeded: {what} needs {needed}, limit is {limit}")]
    Resource {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("vertex {vertex} out of range (graph has {count} vertices)")]
    InvalidVertex { vertex: usize, count: usize },

    #[error("dense backend limited to {cap} vertices, graph has {vertices}; use the series backend")]
    DenseCap { vertices: usize, cap: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
