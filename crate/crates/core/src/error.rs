use std::io;

use thiserror::Error;

/// Errors raised across the model, simulator and correlator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("inconsistent measurement: {0}")]
    InconsistentMeasurement(String),

    #[error("noiseless ideal: accidental coincidence rate is zero")]
    Noiseless,

    #[error("waveform truncated: {0}")]
    Truncation(String),

    #[error("filter not resolvable: {0}")]
    Resolution(String),

    #[error("waveform shape: {0}")]
    Shape(String),

    #[error("no detectable correlation peak (max g2 {max_g2:.4})")]
    NoPeak { max_g2: f64 },

    #[error("capacity exceeded: {expected} expected events > cap {cap}")]
    Capacity { expected: u64, cap: u64 },

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Domain(_)
            | Error::Config(_)
            | Error::Truncation(_)
            | Error::Resolution(_)
            | Error::Shape(_)
            | Error::Format { .. } => 2,
            Error::Infeasible(_)
            | Error::InconsistentMeasurement(_)
            | Error::Noiseless
            | Error::NoPeak { .. }
            | Error::Capacity { .. } => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
