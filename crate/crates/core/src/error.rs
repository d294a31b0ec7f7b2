use thiserror::Error;

/// Errors raised by the catenoid engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain violation: y = {0} lies outside [-1, 1]")]
    Domain(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("table error: {0}")]
    Table(String),

    #[error("prescription is not finite at y = {y}")]
    NonFinite { y: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("x = {x} lies outside the integrated range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("branch too short: reached x = {reached}, need x >= {required}")]
    BranchTooShort { reached: f64, required: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no valid samples: {0}")]
    NoSamples(String),
}

pub type Result<T> = std::result::Result<T, Error>;
