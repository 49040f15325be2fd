use std::path::PathBuf;

use thiserror::Error;

use crate::params::KappaInfeasibility;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("condition-number bound infeasible: {0}")]
    KappaInfeasible(KappaInfeasibility),

    #[error("{subsets} column subsets exceed the enumeration budget of {budget}")]
    CombinatorialBudget { subsets: u128, budget: u128 },

    #[error("backtracking did not satisfy the majorization test after {retries} retries (lambda = {lambda:e})")]
    BacktrackingExhausted { retries: usize, lambda: f64 },

    #[error("{solver}: non-finite iterate at iteration {iteration}")]
    NonFinite { solver: &'static str, iteration: usize },

    #[error("linear system is singular after regularization")]
    Singular,

    #[error("malformed {what}: {reason}")]
    Malformed { what: &'static str, reason: String },

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
