use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid event sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("event type {k} out of range for a {m}-type model")]
    TypeOutOfRange { k: usize, m: usize },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("operation requires a {required} model")]
    ModeMismatch { required: &'static str },

    #[error("intensity is {value} at event {index} (t = {time}, mark = {mark}); log-likelihood undefined")]
    ZeroIntensity {
        index: usize,
        time: f64,
        mark: usize,
        value: f64,
    },

    #[error("model is unstable: spectral radius {radius} >= 1")]
    Unstable { radius: f64 },

    #[error("simulation exceeded {limit} events; model is explosive over this horizon")]
    Explosive { limit: usize },

    #[error("non-finite objective at epoch {epoch}")]
    NonFinite { epoch: usize, partial_trace: Vec<f64> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: duplicate date {date}")]
    DuplicateDate { path: PathBuf, date: String },

    #[error("{path}: dates not increasing at {date}")]
    NonMonotoneDates { path: PathBuf, date: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::Explosive { .. } | Error::ZeroIntensity { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidSequence(_) => "invalid_sequence",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::TypeOutOfRange { .. } => "type_out_of_range",
            Error::TimeOutOfRange { .. } => "time_out_of_range",
            Error::ModeMismatch { .. } => "mode_mismatch",
            Error::ZeroIntensity { .. } => "zero_intensity",
            Error::Unstable { .. } => "unstable",
            Error::Explosive { .. } => "explosive",
            Error::NonFinite { .. } => "non_finite",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::DuplicateDate { .. } => "duplicate_date",
            Error::NonMonotoneDates { .. } => "non_monotone_dates",
            Error::Degenerate(_) => "degenerate",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Json(_) => "json",
        }
    }
}
