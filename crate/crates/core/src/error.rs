use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("`{name}` must be a positive integer (got {value})")]
    NonPositiveDimension { name: &'static str, value: i64 },
    #[error("pilot length N = {pilot_len} exceeds coherence interval N_c = {coherence_len}")]
    PilotExceedsCoherence { pilot_len: usize, coherence_len: usize },
    #[error("delta_max = {delta_max} must be below pi/K = {limit} so that per-user search windows do not overlap")]
    OverlappingWindows { delta_max: f64, limit: f64 },
    #[error("power delay profile must be {expected_users}x{expected_taps}, got {got}")]
    PdpShapeMismatch { expected_users: usize, expected_taps: usize, got: String },
    #[error("`{name}` is invalid: {reason}")]
    InvalidValue { name: &'static str, reason: String },
    #[error("carrier parameters imply {name} = {derived}, but {given} was given")]
    CarrierMismatch { name: &'static str, derived: f64, given: f64 },
    #[error("sample block length {got} does not match the expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("time index {index} is outside the available support [{start}, {end})")]
    IndexOutOfRange { index: i64, start: i64, end: i64 },
    #[error("alpha selection did not converge after {steps} steps")]
    NoConvergence { steps: usize },
    #[error("at least 2 trials are required, got {0}")]
    InsufficientTrials(usize),
    #[error("target rate {target} bpcu not attainable in [{lo_db}, {hi_db}] dB (rate at upper edge {rate_hi})")]
    BracketFailure { target: f64, lo_db: f64, hi_db: f64, rate_hi: f64 },
    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),
    #[error("sweep value list is empty")]
    EmptySweep,
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveDimension { .. }
                | Error::PilotExceedsCoherence { .. }
                | Error::OverlappingWindows { .. }
                | Error::PdpShapeMismatch { .. }
                | Error::InvalidValue { .. }
                | Error::CarrierMismatch { .. }
                | Error::UnknownParameter(_)
                | Error::EmptySweep
                | Error::Config(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
