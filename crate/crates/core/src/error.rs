use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: {msg}")]
    Schema { file: PathBuf, line: usize, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{what} = {value} is outside the valid range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("unknown tenor index {0}")]
    UnknownTenor(usize),

    #[error("correlation loadings violate sum(rho^2) <= 1 (got {0})")]
    InvalidCorrelation(f64),

    #[error("price {price} is outside the no-arbitrage band [{lo}, {hi}]")]
    PriceOutOfBand { price: f64, lo: f64, hi: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn schema(file: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Schema {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
