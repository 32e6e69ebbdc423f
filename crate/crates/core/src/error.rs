use std::fmt;

use thiserror::Error;

use crate::workload::{AdapterId, RequestId};

/// One failed configuration constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    pub field: String,
    pub constraint: String,
}

impl ConfigViolation {
    pub fn new(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            constraint: constraint.into(),
        }
    }
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", join(.0))]
    InvalidConfig(Vec<ConfigViolation>),

    #[error("empty range: lo {lo} > hi {hi}")]
    EmptyRange { lo: i64, hi: i64 },

    #[error("unknown adapter {0}")]
    UnknownAdapter(AdapterId),

    #[error("time went backwards: {now} < {last}")]
    TimeRegression { now: f64, last: f64 },

    #[error("request {0} is already queued or in flight")]
    DuplicateRequest(RequestId),

    #[error("request {0} is not in flight")]
    UnknownRequest(RequestId),

    #[error("a step needs at least one decoding sequence or one prefill")]
    EmptyStep,

    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),

    #[error("percentile of an empty sample")]
    EmptySample,

    #[error("percentile rank {0} outside (0, 1]")]
    BadPercentile(f64),

    #[error("cannot merge reports with different engine configs")]
    IncompatibleReports,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("need ≥ {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("missing feature {0}")]
    MissingFeature(String),

    #[error("task names do not align: {0}")]
    NameMismatch(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn join(violations: &[ConfigViolation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
