use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("decay ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("series cannot converge for decay ratio {ratio}")]
    NoConvergence { ratio: f64 },

    #[error("numerical sanity check failed: {0}")]
    NumericalSanity(String),

    #[error("quadrature {x} outside tabulated kernel range |x| <= {limit}")]
    Extrapolation { x: f64, limit: f64 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
