use thiserror::Error;

/// Errors raised by the static pipeline, the kinetic engine and dataset I/O.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("cannot move back in time: requested t = {requested}, state is at t = {current}")]
    TimeTravel { requested: f64, current: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
