use thiserror::Error;

/// Errors raised by the model systems and the estimators built on them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside every branch domain")]
    Domain { point: Vec<f64> },

    #[error("orbit escaped the domain at step {step}")]
    Escape { step: usize },

    #[error("point {point:?} is not in the coded invariant set (tolerance {tolerance:e})")]
    Coding { point: Vec<f64>, tolerance: f64 },

    #[error("non-finite value at step {step}: {what}")]
    Numerical { step: usize, what: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("value {value} outside the admissible range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    #[error("structure error: {0}")]
    Structure(String),

    #[error("precision error: {0}")]
    Precision(String),

    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("unresolved: estimate not stable, last bracket [{lo}, {hi}]")]
    Unresolved { lo: f64, hi: f64 },

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
