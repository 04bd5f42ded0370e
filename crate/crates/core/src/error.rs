use std::path::PathBuf;

use thiserror::Error;

use crate::subsolvers::LpStatus;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate sample set: {0}")]
    DegenerateSampleSet(String),

    #[error("model fit failed: {0}")]
    FitFailure(String),

    #[error("linear program not solved: {0:?}")]
    Lp(LpStatus),

    #[error("simplex iteration limit of {0} pivots reached")]
    LpIterationLimit(usize),

    #[error("trust-region subproblem failed: {0}")]
    Trs(String),

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("exhaustive enumeration of {count} supports exceeds the limit of {limit}")]
    CombinatorialGuard { count: u128, limit: u128 },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("problem {name} does not admit n = {n}: {reason}")]
    InvalidDimension {
        name: String,
        n: usize,
        reason: String,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
