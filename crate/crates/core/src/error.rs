use thiserror::Error;

use crate::chem::SmilesError;
use crate::tensor::TensorError;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("featurization error: {0}")]
    Featurize(String),
    #[error("data error at line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Tensor(_) | Error::Numeric(_) | Error::Fit(_) => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
