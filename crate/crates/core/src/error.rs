use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("element index out of range: {kind} index {index} (array has {len})")]
    InvalidIndex {
        kind: &'static str,
        index: usize,
        len: usize,
    },

    #[error("subbands overlap: [{a_lo}, {a_hi}) and [{b_lo}, {b_hi}) Hz")]
    OverlappingSubbands {
        a_lo: f64,
        a_hi: f64,
        b_lo: f64,
        b_hi: f64,
    },

    #[error("sample rate {rate} Hz is below the required {required} Hz")]
    InsufficientSampleRate { rate: f64, required: f64 },

    #[error("target delay {delay} s is not below the PRI {pri} s (ambiguous range)")]
    AmbiguousRange { delay: f64, pri: f64 },

    #[error("SNR is undefined for an all-zero signal")]
    UndefinedSnr,

    #[error("no usable Fourier coefficients: {0}")]
    EmptyKappa(String),

    #[error("decimation ratio {channel_rate}/{adc_rate} is not an integer")]
    NonIntegerDecimation { channel_rate: f64, adc_rate: f64 },

    #[error("coset violation: bins {first} and {second} fold onto low-rate bin {folded}")]
    CosetViolation {
        first: usize,
        second: usize,
        folded: usize,
    },

    #[error("empty active element set")]
    EmptyActiveSet,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rank-deficient refit at support pair (range {range}, azimuth {azimuth})")]
    RankDeficient { range: usize, azimuth: usize },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_)
            | Error::OverlappingSubbands { .. }
            | Error::InsufficientSampleRate { .. }
            | Error::NonIntegerDecimation { .. } => "config",
            Error::InvalidIndex { .. } | Error::EmptyActiveSet | Error::Dimension(_) => "input",
            Error::AmbiguousRange { .. } => "scene",
            Error::UndefinedSnr => "noise",
            Error::EmptyKappa(_) | Error::CosetViolation { .. } => "sampling",
            Error::RankDeficient { .. } => "solver",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
