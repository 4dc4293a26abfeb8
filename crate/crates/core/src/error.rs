use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid vote {value} at row {row}, column {col}; votes must be -1 or +1")]
    InvalidVote { row: usize, col: usize, value: i64 },
    #[error("invalid label {value} at row {row}; labels must be -1 or +1")]
    InvalidLabel { row: usize, value: i64 },
    #[error("invalid group {value} at row {row}; groups must be 0 or 1")]
    InvalidGroup { row: usize, value: i64 },
    #[error("score {value} at row {row} outside [0, 1]")]
    InvalidScore { row: usize, value: f64 },
    #[error("group {group} has no rows")]
    EmptyGroup { group: u8 },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("duplicate row id {0:?}")]
    DuplicateId(String),
    #[error("row id {0:?} missing from companion input")]
    UnknownId(String),
    #[error("need at least 3 labeling functions, got {m}")]
    TooFewLFs { m: usize },
    #[error("pairwise vote moments degenerate for labeling functions {lfs:?}")]
    DegenerateMoments { lfs: Vec<usize> },
    #[error("need at least {required} rows, got {n}")]
    TooFewRows { n: usize, required: usize },
    #[error("covariance is numerically singular (condition number {condition:e})")]
    SingularCovariance { condition: f64 },
    #[error("every transport kernel entry underflows")]
    NumericalUnderflow,
    #[error("destination point set is empty")]
    EmptyDestination,
    #[error("matrix is zero")]
    ZeroMatrix,
    #[error("training loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) => ErrorKind::Usage,
            Error::SingularCovariance { .. }
            | Error::NumericalUnderflow
            | Error::NonFiniteLoss { .. }
            | Error::DegenerateMoments { .. }
            | Error::ZeroMatrix => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}
