use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("signal of {len} samples is shorter than one frame of {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("invalid frequency bin set: {0}")]
    InvalidBinSet(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("correlation matrix is rank deficient (condition number {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("weight profile overflows: {0}")]
    WeightOverflow(String),

    #[error("frequency bin {bin} carries no valid estimate")]
    InvalidBin { bin: usize },

    #[error("left transfer function is near zero at bin {bin} (|H_L| = {magnitude:e})")]
    NearZeroBin { bin: usize, magnitude: f64 },

    #[error("empty frequency bin set")]
    EmptySelection,

    #[error("no valid bins to select from")]
    NoValidBins,

    #[error("non-finite value at iteration {iter}")]
    NonFinite { iter: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
