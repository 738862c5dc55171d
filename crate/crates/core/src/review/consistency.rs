use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::actions::{replay, ActionKind, ReviewAction};
use super::ReviewError;
use crate::model::{AssignmentId, ReviewerId, RubricId};
use crate::pipeline::FeedbackComment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricConsistency {
    pub rubric_id: RubricId,
    pub n_reviewed: usize,
    pub n_flipped: usize,
    pub n_edited: usize,
    pub n_dismissed: usize,
    pub flip_rate: f64,
    pub edit_rate: f64,
    /// Share of non-dismissed reviewed comments where the reviewer kept the
    /// AI verdict. `None` if every reviewed comment was dismissed.
    pub ai_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub reviewer_id: ReviewerId,
    pub assignment_id: AssignmentId,
    /// Least-trusted rubrics first.
    pub rubrics: Vec<RubricConsistency>,
}

/// Per-rubric flip/edit rates of one reviewer over `comments`, using each
/// comment's latest action by that reviewer. `rubric_order` breaks ties.
pub fn consistency_report(
    reviewer: &ReviewerId,
    assignment_id: &AssignmentId,
    comments: &[&FeedbackComment],
    actions: &[ReviewAction],
    rubric_order: &[RubricId],
) -> Result<ConsistencyReport, ReviewError> {
    let states = replay(comments.iter().copied(), actions);
    let mut tallies: BTreeMap<RubricId, [usize; 5]> = BTreeMap::new();
    for c in comments {
        let Some(state) = states.get(&(c.id.clone(), reviewer.clone())) else {
            continue;
        };
        let t = tallies.entry(c.rubric_id.clone()).or_default();
        t[0] += 1;
        t[1] += usize::from(state.flipped());
        t[2] += usize::from(state.action == ActionKind::Edit);
        t[3] += usize::from(state.dismissed());
        t[4] += usize::from(!state.dismissed() && !state.flipped());
    }
    if tallies.is_empty() {
        return Err(ReviewError::NoData(format!(
            "reviewer {reviewer} has no actions on assignment {assignment_id}"
        )));
    }

    let mut rubrics: Vec<RubricConsistency> = tallies
        .into_iter()
        .map(|(rubric_id, [n, flipped, edited, dismissed, kept])| {
            let judged = n - dismissed;
            RubricConsistency {
                rubric_id,
                n_reviewed: n,
                n_flipped: flipped,
                n_edited: edited,
                n_dismissed: dismissed,
                flip_rate: flipped as f64 / n as f64,
                edit_rate: edited as f64 / n as f64,
                ai_agreement: (judged > 0).then(|| kept as f64 / judged as f64),
            }
        })
        .collect();

    let rank = |id: &RubricId| {
        rubric_order
            .iter()
            .position(|r| r == id)
            .unwrap_or(usize::MAX)
    };
    rubrics.sort_by(|a, b| {
        let by_agreement = match (a.ai_agreement, b.ai_agreement) {
            (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_agreement.then_with(|| rank(&a.rubric_id).cmp(&rank(&b.rubric_id)))
    });

    Ok(ConsistencyReport {
        reviewer_id: reviewer.clone(),
        assignment_id: assignment_id.clone(),
        rubrics,
    })
}
