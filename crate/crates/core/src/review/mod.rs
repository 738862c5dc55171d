//! TA review: actions on generated comments, the event store, and
//! AI/TA agreement reports.

mod actions;
mod agreement;
mod consistency;
mod store;

pub use actions::{apply, replay, validate_action, ActionKind, EffectiveState, ReviewAction};
pub use agreement::{
    agreement, agreement_between, kappa, AgreementReport, ItemKey, Rater, RubricAgreement,
    VerdictMap,
};
pub use consistency::{consistency_report, ConsistencyReport, RubricConsistency};
pub use store::{RunRecord, RunStatus, Store, StoreEvent};

use crate::model::{AssignmentId, CommentId, EssayId, RubricId, RunId, ValidationError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReviewError {
    #[error("unknown comment {0}")]
    UnknownComment(CommentId),
    #[error("unknown essay {0}")]
    UnknownEssay(EssayId),
    #[error("unknown assignment {0}")]
    UnknownAssignment(AssignmentId),
    #[error("unknown rubric {0}")]
    UnknownRubric(RubricId),
    #[error("unknown run {0}")]
    UnknownRun(RunId),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("raters cover different items ({only_a} only in first, {only_b} only in second)")]
    ItemMismatch { only_a: usize, only_b: usize },
    #[error("no data: {0}")]
    NoData(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("validation failed: {}", summarize(.0))]
    Validation(Vec<ValidationError>),
    #[error("storage i/o: {0}")]
    Io(String),
    #[error("store file corrupt at line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

fn summarize(errors: &[ValidationError]) -> String {
    errors
        .iter()
        .map(|e| format!("{}: {}", e.field, e.message))
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<std::io::Error> for ReviewError {
    fn from(e: std::io::Error) -> Self {
        ReviewError::Io(e.to_string())
    }
}

impl ReviewError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ReviewError::UnknownComment(_)
            | ReviewError::UnknownEssay(_)
            | ReviewError::UnknownAssignment(_)
            | ReviewError::UnknownRubric(_)
            | ReviewError::UnknownRun(_) => "not_found",
            ReviewError::InvalidAction(_) => "invalid_action",
            ReviewError::ItemMismatch { .. } => "item_mismatch",
            ReviewError::NoData(_) => "no_data",
            ReviewError::Conflict(_) => "conflict",
            ReviewError::Validation(_) => "validation_failed",
            ReviewError::Io(_) | ReviewError::Corrupt { .. } => "storage_error",
        }
    }

    /// True when the caller sent something wrong, as opposed to a storage
    /// failure.
    pub fn is_caller_error(&self) -> bool {
        !matches!(self, ReviewError::Io(_) | ReviewError::Corrupt { .. })
    }
}
