use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A clique or separator of a clique tree, by position in its list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Clique(usize),
    Separator(usize),
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::Clique(i) => write!(f, "clique {i}"),
            Block::Separator(i) => write!(f, "separator {i}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("covariance block of {block} is not positive definite: {detail}")]
    LocalNotPositiveDefinite { block: Block, detail: String },

    #[error("column {column} has zero variance")]
    ZeroVariance { column: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("insufficient data: need {needed} rows, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("constraint matrix is rank deficient under the model covariance")]
    RankDeficientConstraint,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for every flavour of positive-definiteness failure.
    pub fn is_not_positive_definite(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::LocalNotPositiveDefinite { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
