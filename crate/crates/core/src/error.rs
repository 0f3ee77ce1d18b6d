use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chirp configuration: {0}")]
    Chirp(String),

    #[error("delay {delay:e} s is outside one sweep period of {period:e} s")]
    DelayOutOfRange { delay: f64, period: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("scene: {0}")]
    Scene(String),

    #[error("scene pixel ({x}, {y}) at {depth} m is beyond the unambiguous range of {max_range} m")]
    BeyondRange {
        x: usize,
        y: usize,
        depth: f64,
        max_range: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty support: {0}")]
    EmptySupport(String),

    #[error("label `{0}` not present in scene")]
    MissingLabel(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
