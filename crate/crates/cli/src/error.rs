use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("numerical failure: {0}")]
    Numerical(#[from] fracmom_core::Error),
    #[error("serialization failure: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

impl CliError {
    /// 2 for anything wrong with the configuration, 3 for failures during
    /// or after computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema { .. } | Self::Invalid(_) | Self::Read { .. } | Self::UnknownPreset(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
