use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("cosine undefined: argument has zero norm")]
    ZeroNorm,

    #[error("covariance is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("unsupported activation for this operation: {0}")]
    UnsupportedActivation(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration diverged at alpha = {alpha}: {detail}")]
    Diverged { alpha: f64, detail: String },

    #[error("format error at byte offset {offset}: {detail}")]
    Format { offset: usize, detail: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
