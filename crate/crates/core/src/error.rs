use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} qubits, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("identity string is not a valid rotation generator")]
    InvalidGenerator,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not Hermitian (max imaginary coefficient {0:e})")]
    NonHermitian(f64),

    #[error("non-finite value in {0}")]
    Numeric(&'static str),

    #[error("dense backend limited to {cap} qubits, got {n_qubits}")]
    CapExceeded { cap: usize, n_qubits: usize },

    #[error("Wilson loop link overlap {overlap:e} at grid point {index}; grid too coarse")]
    GridTooCoarse { index: usize, overlap: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_qubits(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
