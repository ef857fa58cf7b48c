//! Error type shared by all toolkit modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid subsystem layout: {0}")]
    Layout(String),

    #[error("invalid subsystem permutation: {0}")]
    Permutation(String),

    #[error("matrix is not Hermitian (max |m - m^dag| = {max_dev:.3e})")]
    NotHermitian { max_dev: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("measurement pair is incompatible (margin {margin:.6e}), no joint decomposition exists")]
    IncompatiblePair { margin: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid classical model: {0}")]
    InvalidModel(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
