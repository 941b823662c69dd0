use std::path::PathBuf;

/// Errors produced anywhere in the simulation and prediction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported channel profile `{0}`")]
    UnsupportedProfile(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate channel: condition number {0:.3e} exceeds 1e12")]
    DegenerateChannel(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("trace too short: {len} slots, need at least {min}")]
    TraceTooShort { len: usize, min: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("normalization undefined: all targets are zero")]
    UndefinedNormalization,
    #[error("empty data: {0}")]
    EmptyData(String),
    #[error("infeasible dataset: {0}")]
    InfeasibleDataset(String),
    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
