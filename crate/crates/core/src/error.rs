// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("LAPACK routine {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    /// Left and right eigenvalue sets could not be matched; the matrix is
    /// numerically close to defective.
    #[error("biorthogonal pairing failed: {0}")]
    PairingFailure(String),

    /// A resonance has (numerically) zero width, so a time or energy integral
    /// over it diverges.
    #[error("zero-width resonance at index {index}: |Im| = {width:e}")]
    ZeroWidth { index: usize, width: f64 },

    #[error("Liouvillian is singular: {0}")]
    SingularLiouvillian(String),

    #[error("size limit exceeded: {what} = {got} > {limit}")]
    SizeLimit {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
