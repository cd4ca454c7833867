use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not a prime")]
    NotPrime(u64),

    #[error("invalid window: constancy exponent l={l} must be below ball exponent r={r}")]
    InvalidWindow { r: i32, l: i32 },

    #[error("{value} lies outside the ball B_{r}")]
    OutsideBall { value: String, r: i32 },

    #[error("denominator of {0} is not a pure power of p")]
    NonPrimePowerDenominator(String),

    #[error("division by zero")]
    DivisionByZero,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("scale gamma={gamma} outside the admissible window [{min}, {max}]")]
    ScaleOutOfWindow { gamma: i32, min: i32, max: i32 },

    #[error("invalid offset: {0}")]
    InvalidOffset(String),

    #[error("invalid label {label}: expected a value in {min}..={max}")]
    InvalidLabel { label: u64, min: u64, max: u64 },

    #[error("alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),

    #[error("exact backend requires an integer alpha, got {0}")]
    NonIntegerAlpha(f64),

    #[error("kernel scale cutoff gamma_max={gamma_max} exceeds the ball exponent r={r}")]
    CutoffViolation { gamma_max: i32, r: i32 },

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("invalid time grid: {0}")]
    InvalidTimes(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
