use thiserror::Error;

use crate::ingest::Arm;

/// Errors raised by the sequential testing library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sample is empty")]
    EmptySample,
    #[error("observation is not a finite number")]
    NonFiniteValue,
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("sample size {n} is below n_star = {n_star}")]
    BelowNStar { n: usize, n_star: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("test is already decided; no further updates are accepted")]
    UpdateAfterDecision,
    #[error("need at least 2 events to form an inter-arrival gap, got {count}")]
    InsufficientEvents { count: usize },
    #[error("timestamps must be strictly increasing (violated at index {index})")]
    NonIncreasingTimestamps { index: usize },
    #[error("line {line}: malformed event: {reason}")]
    MalformedEvent { line: usize, reason: String },
    #[error("line {line}: measurement event has no value")]
    MissingValue { line: usize },
    #[error("arm {arm}: timestamp {ts} precedes last seen timestamp {last}")]
    OutOfOrderTimestamp { arm: Arm, ts: f64, last: f64 },
    #[error("snapshot format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
