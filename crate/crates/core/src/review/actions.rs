use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::ReviewError;
use crate::model::{CommentId, ReviewerId, Verdict};
use crate::pipeline::FeedbackComment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    AcceptAi,
    AcceptHistoric,
    Edit,
    FlipJudgment,
    Dismiss,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::AcceptAi => "accept_ai",
            ActionKind::AcceptHistoric => "accept_historic",
            ActionKind::Edit => "edit",
            ActionKind::FlipJudgment => "flip_judgment",
            ActionKind::Dismiss => "dismiss",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewAction {
    pub id: String,
    pub comment_id: CommentId,
    pub reviewer_id: ReviewerId,
    pub action: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_verdict: Option<Verdict>,
    pub created_at: DateTime<Utc>,
}

impl ReviewAction {
    pub fn new(comment_id: CommentId, reviewer_id: ReviewerId, action: ActionKind) -> Self {
        Self {
            id: Uuid::new_v4().to_string(),
            comment_id,
            reviewer_id,
            action,
            final_text: None,
            final_verdict: None,
            created_at: Utc::now(),
        }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.final_text = Some(text.into());
        self
    }

    pub fn with_verdict(mut self, verdict: Verdict) -> Self {
        self.final_verdict = Some(verdict);
        self
    }

    /// Same disposition, ignoring id and timestamp.
    pub fn same_disposition(&self, other: &ReviewAction) -> bool {
        self.comment_id == other.comment_id
            && self.reviewer_id == other.reviewer_id
            && self.action == other.action
            && self.final_text == other.final_text
            && self.final_verdict == other.final_verdict
    }
}

/// A reviewer's current position on one comment, derived from their latest
/// action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectiveState {
    pub comment_id: CommentId,
    pub reviewer_id: ReviewerId,
    pub action_id: String,
    pub action: ActionKind,
    pub ai_verdict: Verdict,
    /// `None` when dismissed.
    pub verdict: Option<Verdict>,
    pub text: Option<String>,
}

impl EffectiveState {
    pub fn dismissed(&self) -> bool {
        self.action == ActionKind::Dismiss
    }

    pub fn flipped(&self) -> bool {
        self.verdict.is_some_and(|v| v != self.ai_verdict)
    }
}

pub fn validate_action(action: &ReviewAction, comment: &FeedbackComment) -> Result<(), ReviewError> {
    if action.reviewer_id.as_str().trim().is_empty() {
        return Err(ReviewError::InvalidAction("reviewer_id is required".into()));
    }
    let original = comment.judgment.verdict;
    match action.action {
        ActionKind::Edit => {
            if action.final_text.as_deref().is_none_or(|t| t.trim().is_empty()) {
                return Err(ReviewError::InvalidAction("edit requires final_text".into()));
            }
        }
        ActionKind::FlipJudgment => match action.final_verdict {
            None => {
                return Err(ReviewError::InvalidAction(
                    "flip_judgment requires final_verdict".into(),
                ))
            }
            Some(v) if v == original => {
                return Err(ReviewError::InvalidAction(format!(
                    "flip_judgment must change the verdict (AI verdict is {original})"
                )))
            }
            Some(_) => {}
        },
        ActionKind::AcceptHistoric => {
            if comment.historic_feedback.is_none() {
                return Err(ReviewError::InvalidAction(
                    "comment has no historic feedback to accept".into(),
                ));
            }
        }
        ActionKind::AcceptAi | ActionKind::Dismiss => {}
    }
    Ok(())
}

/// State after applying one action to a comment.
pub fn apply(comment: &FeedbackComment, action: &ReviewAction) -> EffectiveState {
    let ai = comment.judgment.verdict;
    let (verdict, text) = match action.action {
        // judgment-only comments have no AI text; accepting keeps the verdict
        ActionKind::AcceptAi => (
            Some(ai),
            Some(comment.ai_feedback.clone()).filter(|t| !t.is_empty()),
        ),
        ActionKind::AcceptHistoric => (Some(ai), comment.historic_feedback.clone()),
        ActionKind::Edit => (
            Some(action.final_verdict.unwrap_or(ai)),
            action.final_text.clone(),
        ),
        ActionKind::FlipJudgment => (
            action.final_verdict.or(Some(ai.flipped())),
            action.final_text.clone(),
        ),
        ActionKind::Dismiss => (None, None),
    };
    EffectiveState {
        comment_id: comment.id.clone(),
        reviewer_id: action.reviewer_id.clone(),
        action_id: action.id.clone(),
        action: action.action,
        ai_verdict: ai,
        verdict,
        text,
    }
}

/// Folds an action log into the latest state per (comment, reviewer).
/// Actions on unknown comments are skipped.
pub fn replay<'a>(
    comments: impl IntoIterator<Item = &'a FeedbackComment>,
    actions: &[ReviewAction],
) -> BTreeMap<(CommentId, ReviewerId), EffectiveState> {
    let by_id: BTreeMap<&CommentId, &FeedbackComment> =
        comments.into_iter().map(|c| (&c.id, c)).collect();
    let mut out = BTreeMap::new();
    for action in actions {
        if let Some(comment) = by_id.get(&action.comment_id) {
            out.insert(
                (action.comment_id.clone(), action.reviewer_id.clone()),
                apply(comment, action),
            );
        }
    }
    out
}
