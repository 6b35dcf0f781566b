use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {value} outside the domain of {op}")]
    Domain { op: &'static str, value: f64 },
    #[error("{op} did not converge after {iterations} iterations")]
    NoConvergence { op: &'static str, iterations: usize },
    #[error("decimation sequence hits forbidden value {value} at level {level}")]
    ForbiddenValue { level: usize, value: f64 },
    #[error("branch word must be empty or end in +1")]
    TrailingMinus,
    #[error("level {level} exceeds the limit {limit}")]
    LevelTooLarge { level: usize, limit: usize },
    #[error("{0} is not an eigenvalue of the discrete operator")]
    NoSuchEigenvalue(f64),
    #[error("ambiguous region classification: {0}")]
    Ambiguous(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
