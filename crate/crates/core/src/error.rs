use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("occupancy overflow: mode {slot} would hold {count} photons (total {total}), cap is 2")]
    OccupancyOverflow { slot: usize, count: u8, total: u8 },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NonUnitaryMatrix { deviation: f64 },

    #[error("mode labels do not match: {0}")]
    ModeLabelMismatch(String),

    #[error("operation requires a {expected} state, got a {found} state")]
    WrongStage { expected: &'static str, found: &'static str },

    #[error("pair amplitudes not normalized: |alpha|^2 + |beta|^2 = {0}")]
    NonNormalizedPairAmplitude(f64),

    #[error("cannot normalize a zero vector")]
    ZeroNorm,

    #[error("occupation ({n_plus}, {n_minus}) is outside the two-photon model")]
    OutOfModel { n_plus: u8, n_minus: u8 },

    #[error("inconsistent settings across CHSH tables: {0}")]
    InconsistentSettings(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("malformed tables: {0}")]
    MalformedTables(String),

    #[error("local bound mismatch: stored {stored}, recomputed {recomputed}")]
    BoundMismatch { stored: f64, recomputed: f64 },

    #[error("LP result failed re-verification: {0}")]
    LpVerification(String),

    #[error("invalid run configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("setting pair {0} never occurs in the event log")]
    EmptySettingPair(usize),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
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

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
