use thiserror::Error;

/// Errors raised by the library. Every variant corresponds to a violated
/// precondition or a numerical routine that could not certify its answer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty probability vector")]
    Empty,

    #[error("non-finite probability mass at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("negative probability mass at index {index}: {value}")]
    Negative { index: usize, value: f64 },

    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("support size mismatch: {left} vs {right}")]
    SupportMismatch { left: usize, right: usize },

    #[error("ensemble needs at least 2 members, got {0}")]
    TooFewMembers(usize),

    #[error("prior has length {got}, expected {expected}")]
    PriorLength { expected: usize, got: usize },

    #[error("product space of {points} points exceeds the cap of {cap}")]
    SizeCap { points: u128, cap: usize },

    #[error("argument `{name}` = {value} outside of {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: String,
    },

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("missing required parameter `{0}`")]
    MissingParameter(String),

    #[error("derivative is zero at a = {0}; choose a further from 1 - 1/N")]
    ZeroDerivative(f64),

    #[error("{routine} did not converge within {iterations} iterations (gap {gap:e})")]
    NonConvergence {
        routine: &'static str,
        iterations: usize,
        gap: f64,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("no feasible point on the supplied grid")]
    EmptyGrid,

    #[error("candidate budget of {budget} words exhausted with {found} of {target} codewords")]
    CodeBudgetExhausted { budget: usize, found: usize, target: usize },

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn out_of_range(name: &'static str, value: f64, range: impl Into<String>) -> Error {
    Error::OutOfRange {
        name,
        value,
        range: range.into(),
    }
}
