use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare { row: usize, len: usize, expected: usize },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum} instead of 1")]
    RowSumOutOfTolerance { row: usize, sum: f64 },
    #[error("distribution entry {index} is {value}, outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },
    #[error("distribution sums to {sum} instead of 1")]
    DistributionSum { sum: f64 },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("p({index}) > 0 but q({index}) = 0")]
    AbsoluteContinuityViolation { index: usize },
    #[error("state {state} has zero intervention mass")]
    StateOutsideSupport { state: usize },
    #[error("state index {index} out of range for {n} states")]
    StateOutOfRange { index: usize, n: usize },
    #[error("no endogenous states or elements")]
    EmptyEndogenous,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid model choice: {0}")]
    InvalidChoice(String),
    #[error("endogenous row {row} leaks {leaked} probability mass into exogenous states")]
    MassEscapesEndogenous { row: usize, leaked: f64 },
    #[error("generalized case needs at least 3 states, got {0}")]
    TooFewStates(usize),
    #[error("element {element}: truth table has {len} entries, fan-in {fan_in} needs {expected}")]
    FanInStateMissing { element: usize, fan_in: usize, len: usize, expected: usize },
    #[error("element {element}: {reason}")]
    InvalidElement { element: usize, reason: String },
    #[error("network has {0} elements; at most {max} supported", max = crate::gates::MAX_ELEMENTS)]
    TooManyElements(usize),
    #[error("message of {len} bits is not divisible into {bits_per_symbol}-bit symbols")]
    IndivisibleMessage { len: usize, bits_per_symbol: usize },
    #[error("code carries no information: {0}")]
    DegenerateCode(String),
    #[error("search would evaluate {count} choices, above the budget of {budget}")]
    RefusedAboveThreshold { count: u128, budget: u128 },
    #[error("ladder level {0} is not available for this input")]
    UnsupportedLevel(u8),
    #[error("capacity iteration stopped after {iterations} iterations with bound gap {gap}")]
    NotConverged { iterations: usize, gap: f64, best: crate::capacity::CapacityResult<f64> },
    #[error("invalid annealing schedule: {0}")]
    InvalidSchedule(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

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
