use thiserror::Error;

/// Errors produced by the dereverberation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{algorithm}: non-finite state at frame {frame}, bin {bin}")]
    NonFinite {
        algorithm: &'static str,
        frame: usize,
        bin: usize,
    },

    #[error("unsupported wav format: {0}")]
    UnsupportedWav(String),

    #[error("MAC instrumentation was not enabled for this run")]
    InstrumentationDisabled,

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
