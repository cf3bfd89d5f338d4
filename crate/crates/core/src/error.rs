use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("signal of length {len} is too short (need at least {min} samples)")]
    TooShort { len: usize, min: usize },

    #[error("assumed period {period} is outside 2..={max} for a signal of length {len}")]
    BadPeriod { period: usize, max: usize, len: usize },

    #[error("signal of length {len} is shorter than the period {period}")]
    InsufficientData { len: usize, period: usize },

    #[error("no dips found in the variance profile")]
    NoDipsFound,

    #[error("no dip location is present in all {runs} Monte Carlo runs")]
    NoConsistentDips { runs: usize },

    #[error("hidden period {hidden} does not divide the period {period}")]
    NotAFactor { hidden: usize, period: usize },

    #[error("decomposition has zero total energy")]
    ZeroEnergy,

    #[error("no components to redistribute the DC level over")]
    NoComponents,

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("clean signal has zero power")]
    ZeroPowerSignal,

    #[error("noisy signal is identical to the clean signal")]
    ZeroNoise,

    #[error("invalid experiment config: {0}")]
    BadConfig(String),

    #[error("{0}")]
    Io(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    /// True for the failures an estimator reports when the signal carries
    /// no usable periodic evidence.
    pub fn is_estimation_failure(&self) -> bool {
        matches!(self, Error::NoDipsFound | Error::NoConsistentDips { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
