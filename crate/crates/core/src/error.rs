use thiserror::Error;

use crate::montecarlo::FrameSet;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The σ→0 limit has no finite amplitude; callers should use the sampling routines.
    #[error("unsupported limit: {0}")]
    UnsupportedLimit(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("no carrier: {0}")]
    NoCarrier(String),

    #[error("undefined estimate: {0}")]
    UndefinedEstimate(String),

    /// A histogram bin would exceed its capacity. Carries everything merged
    /// before the offending hit.
    #[error("histogram bin overflow after {merged_trials} trials")]
    HistogramOverflow {
        merged_trials: u64,
        partial: Box<FrameSet>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
