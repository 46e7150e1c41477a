use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("line {line}: key `{key}`: {message}")]
    Parse { line: usize, key: String, message: String },

    #[error("{0}")]
    OutOfRange(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (relative deviation {0:e})")]
    NotHermitian(f64),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("selection `{0}` matched no states")]
    EmptySelection(String),

    #[error("no sign change in bracket [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("state tracking ambiguous (overlap {overlap:.3}); try a smaller step")]
    Tracking { overlap: f64 },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
