use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid register: {0}")]
    InvalidRegister(String),
    #[error("orbital {0} is not in the register")]
    InvalidOrbital(String),
    #[error("space has no boson mode (boson_levels = {0}, need at least 2)")]
    NoBosonMode(usize),
    #[error("invalid operand: {0}")]
    InvalidOperand(String),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical instability at step {step} (t = {time:.3} fs): {reason}")]
    NumericalInstability { step: usize, time: f64, reason: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("resonant regime: {0}")]
    ResonantRegime(String),
    #[error("not supported by the exact oracle: {0}")]
    UnsupportedByOracle(String),
    #[error("unknown config key `{key}` on line {line}")]
    UnknownKey { key: String, line: usize },
    #[error("missing required config keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
