use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("frequency mismatch: {left} Hz vs {right} Hz")]
    FrequencyMismatch { left: f64, right: f64 },

    #[error("no dispersion root found scanning phase velocity over [{lo}, {hi}] m/s")]
    NoRoot { lo: f64, hi: f64 },

    #[error("mode is inconsistent with the dispersion relation (normalised determinant {determinant:e})")]
    InconsistentMode { determinant: f64 },

    #[error("wave has not arrived yet: t = {t} s, arrival at {arrival} s")]
    NotYetArrived { t: f64, arrival: f64 },

    #[error("infeasible plan: {0}")]
    Infeasible(String),

    #[error("burst duration {burst} s would freeze the counter (timeout {timeout} s)")]
    FreezeRisk { burst: f64, timeout: f64 },

    #[error("calibration failed: amplitude variation {variation:e} V below noise floor {floor:e} V")]
    CalibrationFailed { variation: f64, floor: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("deflation stalls: effective rate {rate} mmHg/s")]
    DeflationStall { rate: f64 },

    #[error("malformed binary data: {0}")]
    Format(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, message: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
