use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),

    #[error("{name} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("rate function has no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("arity mismatch: expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("code spec violation: {0}")]
    CodeSpec(String),

    #[error("cell {cell} failed: {message}")]
    CellFailed { cell: String, message: String },

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
