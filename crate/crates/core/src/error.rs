use thiserror::Error;

/// Errors produced anywhere in the fusion stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("invalid shape {shape:?}: {reason}")]
    Shape { shape: Vec<usize>, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("mode error: {0}")]
    Mode(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },
    #[error("length error: expected {expected} payload bytes, found {actual}")]
    Length { expected: u64, actual: u64 },
    #[error("resource limit exceeded: {what} needs an estimated {estimated_bytes} bytes (cap {cap_bytes})")]
    Resource {
        what: &'static str,
        estimated_bytes: u64,
        cap_bytes: u64,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Dimension {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}
