//! The echo-chamber survey instrument, demographic grouping and the
//! statistics kernel behind the study report.

mod report;
mod stats;
mod survey;

pub use report::*;
pub use stats::*;
pub use survey::*;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("{field} = {value} is not a 1..5 Likert answer")]
    BadLikert { field: String, value: u8 },
    #[error("pre-survey of {0} lacks demographics")]
    MissingDemographics(String),
    #[error("invalid survey record: {0}")]
    Invalid(String),
    #[error("participant {participant} already submitted the {phase:?} survey")]
    Duplicate { participant: String, phase: Phase },
    #[error("need at least {need}, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("group {group} has {size} member(s); at least 2 required")]
    GroupTooSmall { group: String, size: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("survey file line {line}: {source}")]
    Corrupt {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, StudyError>;
