use thiserror::Error;

use crate::nn::TrainReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown wavelet '{0}'")]
    UnknownWavelet(String),
    #[error("reflection index N must be odd, got {0}")]
    EvenN(i64),
    #[error("signal length {len} too short (need at least {min})")]
    TooShort { len: usize, min: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("threshold must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("down-sampling needs even spatial dims, got {h}x{w}")]
    OddSpatial { h: usize, w: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    DivergedLoss {
        epoch: usize,
        partial: Box<TrainReport>,
    },
    #[error("severity must be in 1..=5, got {0}")]
    BadSeverity(u8),
    #[error("reference errors sum to zero")]
    ZeroReference,
    #[error("missing corruptions for category: {0:?}")]
    MissingCorruption(Vec<String>),
    #[error("shift of {shift} px out of range for {size} px images")]
    ShiftOutOfRange { shift: i64, size: usize },
    #[error("operation counts need positive sizes, got {0}")]
    NonPositive(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn shape(detail: impl Into<String>) -> Self {
        Error::ShapeMismatch(detail.into())
    }
}
