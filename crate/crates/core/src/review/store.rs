//! Event-sourced store for everything a grading session produces.
//!
//! The on-disk form is a single JSON-lines file, one [`StoreEvent`] per line,
//! only ever appended to. Opening a store replays the file; every query is
//! answered from the folded in-memory state.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::actions::{apply, validate_action, EffectiveState, ReviewAction};
use super::agreement::{agreement_between, AgreementReport, ItemKey, Rater, VerdictMap};
use super::consistency::{consistency_report, ConsistencyReport};
use super::ReviewError;
use crate::lint::{lint_rubric_with, LintConfig, LintWarning};
use crate::model::{
    validate_assignment, validate_rubric, Assignment, AssignmentId, CommentId, Essay, EssayId,
    ReviewerId, Rubric, RubricId, RunId,
};
use crate::pipeline::{FailedComment, FeedbackComment, RunManifest, RunOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Queued,
    Running,
    Partial,
    Complete,
    Failed,
}

impl RunStatus {
    pub fn is_finished(self) -> bool {
        matches!(self, RunStatus::Partial | RunStatus::Complete | RunStatus::Failed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Queued => "queued",
            RunStatus::Running => "running",
            RunStatus::Partial => "partial",
            RunStatus::Complete => "complete",
            RunStatus::Failed => "failed",
        }
    }

    pub fn from_counts(comments: usize, failures: usize) -> Self {
        match (comments, failures) {
            (_, 0) => RunStatus::Complete,
            (0, _) => RunStatus::Failed,
            _ => RunStatus::Partial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: RunId,
    pub assignment_id: AssignmentId,
    pub essay_ids: Vec<EssayId>,
    pub provider: String,
    pub status: RunStatus,
    pub queued_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum StoreEvent {
    Rubric(Rubric),
    Assignment(Assignment),
    Essay(Essay),
    RunQueued {
        run_id: RunId,
        assignment_id: AssignmentId,
        essay_ids: Vec<EssayId>,
        provider: String,
        at: DateTime<Utc>,
    },
    RunStatus {
        run_id: RunId,
        status: RunStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Comment(FeedbackComment),
    Failure(FailedComment),
    RunFinished {
        manifest: RunManifest,
        status: RunStatus,
    },
    Action(ReviewAction),
}

#[derive(Default)]
struct State {
    rubrics: BTreeMap<RubricId, Rubric>,
    rubric_order: Vec<RubricId>,
    assignments: BTreeMap<AssignmentId, Assignment>,
    assignment_order: Vec<AssignmentId>,
    essays: BTreeMap<EssayId, Essay>,
    essay_order: Vec<EssayId>,
    runs: BTreeMap<RunId, RunRecord>,
    run_order: Vec<RunId>,
    comments: HashMap<CommentId, FeedbackComment>,
    run_comments: HashMap<RunId, Vec<CommentId>>,
    run_failures: HashMap<RunId, Vec<FailedComment>>,
    actions: Vec<ReviewAction>,
    effective: BTreeMap<(CommentId, ReviewerId), EffectiveState>,
    latest_action: HashMap<CommentId, usize>,
}

impl State {
    fn apply(&mut self, event: StoreEvent) {
        match event {
            StoreEvent::Rubric(r) => {
                self.rubric_order.push(r.id.clone());
                self.rubrics.insert(r.id.clone(), r);
            }
            StoreEvent::Assignment(a) => {
                self.assignment_order.push(a.id.clone());
                self.assignments.insert(a.id.clone(), a);
            }
            StoreEvent::Essay(e) => {
                self.essay_order.push(e.id.clone());
                self.essays.insert(e.id.clone(), e);
            }
            StoreEvent::RunQueued {
                run_id,
                assignment_id,
                essay_ids,
                provider,
                at,
            } => {
                self.run_order.push(run_id.clone());
                self.runs.insert(
                    run_id.clone(),
                    RunRecord {
                        run_id,
                        assignment_id,
                        essay_ids,
                        provider,
                        status: RunStatus::Queued,
                        queued_at: at,
                        manifest: None,
                        error: None,
                    },
                );
            }
            StoreEvent::RunStatus {
                run_id,
                status,
                error,
            } => {
                if let Some(run) = self.runs.get_mut(&run_id) {
                    run.status = status;
                    run.error = error;
                }
            }
            StoreEvent::Comment(c) => {
                self.run_comments
                    .entry(c.run_id.clone())
                    .or_default()
                    .push(c.id.clone());
                self.comments.insert(c.id.clone(), c);
            }
            StoreEvent::Failure(f) => {
                self.run_failures.entry(f.run_id.clone()).or_default().push(f);
            }
            StoreEvent::RunFinished { manifest, status } => {
                if let Some(run) = self.runs.get_mut(&manifest.run_id) {
                    run.status = status;
                    run.manifest = Some(manifest);
                }
            }
            StoreEvent::Action(a) => {
                if let Some(c) = self.comments.get(&a.comment_id) {
                    self.effective.insert(
                        (a.comment_id.clone(), a.reviewer_id.clone()),
                        apply(c, &a),
                    );
                }
                self.latest_action
                    .insert(a.comment_id.clone(), self.actions.len());
                self.actions.push(a);
            }
        }
    }
}

pub struct Store {
    path: Option<PathBuf>,
    file: Option<File>,
    state: State,
    lint: LintConfig,
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            file: None,
            state: State::default(),
            lint: LintConfig::default(),
        }
    }

    /// Opens (or creates) a store file and replays its events.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ReviewError> {
        let path = path.as_ref().to_path_buf();
        let mut state = State::default();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: StoreEvent =
                    serde_json::from_str(&line).map_err(|e| ReviewError::Corrupt {
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                state.apply(event);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path: Some(path),
            file: Some(file),
            state,
            lint: LintConfig::default(),
        })
    }

    pub fn with_lint_config(mut self, lint: LintConfig) -> Self {
        self.lint = lint;
        self
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn commit(&mut self, event: StoreEvent) -> Result<(), ReviewError> {
        if let Some(file) = self.file.as_mut() {
            let line = serde_json::to_string(&event).expect("store events serialize");
            writeln!(file, "{line}")?;
            file.flush()?;
        }
        self.state.apply(event);
        Ok(())
    }

    // ---- ingestion ----

    /// Stores a rubric and returns its lint warnings.
    pub fn put_rubric(&mut self, rubric: Rubric) -> Result<Vec<LintWarning>, ReviewError> {
        if self.state.rubrics.contains_key(&rubric.id) {
            return Err(ReviewError::Conflict(format!("rubric {} already exists", rubric.id)));
        }
        let errors = validate_rubric(&rubric);
        if !errors.is_empty() {
            return Err(ReviewError::Validation(errors));
        }
        let warnings = lint_rubric_with(&rubric, &self.lint);
        self.commit(StoreEvent::Rubric(rubric))?;
        Ok(warnings)
    }

    pub fn put_assignment(&mut self, assignment: Assignment) -> Result<(), ReviewError> {
        if self.state.assignments.contains_key(&assignment.id) {
            return Err(ReviewError::Conflict(format!(
                "assignment {} already exists",
                assignment.id
            )));
        }
        let rubrics: Vec<Rubric> = self.state.rubrics.values().cloned().collect();
        let errors = validate_assignment(&assignment, &rubrics);
        if !errors.is_empty() {
            return Err(ReviewError::Validation(errors));
        }
        self.commit(StoreEvent::Assignment(assignment))
    }

    pub fn put_essay(&mut self, essay: Essay) -> Result<(), ReviewError> {
        if self.state.essays.contains_key(&essay.id) {
            return Err(ReviewError::Conflict(format!("essay {} already exists", essay.id)));
        }
        if !self.state.assignments.contains_key(&essay.assignment_id) {
            return Err(ReviewError::UnknownAssignment(essay.assignment_id.clone()));
        }
        self.commit(StoreEvent::Essay(essay))
    }

    pub fn rubric(&self, id: &RubricId) -> Option<&Rubric> {
        self.state.rubrics.get(id)
    }

    pub fn rubrics(&self) -> impl Iterator<Item = &Rubric> {
        self.state.rubric_order.iter().map(|id| &self.state.rubrics[id])
    }

    pub fn assignment(&self, id: &AssignmentId) -> Option<&Assignment> {
        self.state.assignments.get(id)
    }

    pub fn assignments(&self) -> impl Iterator<Item = &Assignment> {
        self.state
            .assignment_order
            .iter()
            .map(|id| &self.state.assignments[id])
    }

    pub fn essay(&self, id: &EssayId) -> Option<&Essay> {
        self.state.essays.get(id)
    }

    pub fn essays(&self) -> impl Iterator<Item = &Essay> {
        self.state.essay_order.iter().map(|id| &self.state.essays[id])
    }

    /// The assignment's rubrics in assignment order.
    pub fn rubrics_for(&self, assignment: &AssignmentId) -> Result<Vec<Rubric>, ReviewError> {
        let a = self
            .assignment(assignment)
            .ok_or_else(|| ReviewError::UnknownAssignment(assignment.clone()))?;
        a.rubric_ids
            .iter()
            .map(|id| {
                self.rubric(id)
                    .cloned()
                    .ok_or_else(|| ReviewError::UnknownRubric(id.clone()))
            })
            .collect()
    }

    // ---- runs ----

    /// Records a queued run after checking every essay belongs to the
    /// assignment.
    pub fn queue_run(
        &mut self,
        run_id: RunId,
        assignment_id: AssignmentId,
        essay_ids: Vec<EssayId>,
        provider: &str,
    ) -> Result<(), ReviewError> {
        if self.state.runs.contains_key(&run_id) {
            return Err(ReviewError::Conflict(format!("run {run_id} already exists")));
        }
        if !self.state.assignments.contains_key(&assignment_id) {
            return Err(ReviewError::UnknownAssignment(assignment_id));
        }
        if essay_ids.is_empty() {
            return Err(ReviewError::Validation(vec![crate::model::ValidationError {
                field: "essay_ids".into(),
                message: "essay_ids empty".into(),
            }]));
        }
        for id in &essay_ids {
            match self.state.essays.get(id) {
                None => return Err(ReviewError::UnknownEssay(id.clone())),
                Some(e) if e.assignment_id != assignment_id => {
                    return Err(ReviewError::Validation(vec![crate::model::ValidationError {
                        field: "essay_ids".into(),
                        message: format!("essay {id} belongs to assignment {}", e.assignment_id),
                    }]))
                }
                Some(_) => {}
            }
        }
        self.commit(StoreEvent::RunQueued {
            run_id,
            assignment_id,
            essay_ids,
            provider: provider.to_string(),
            at: Utc::now(),
        })
    }

    pub fn set_run_status(
        &mut self,
        run_id: &RunId,
        status: RunStatus,
        error: Option<String>,
    ) -> Result<(), ReviewError> {
        if !self.state.runs.contains_key(run_id) {
            return Err(ReviewError::UnknownRun(run_id.clone()));
        }
        self.commit(StoreEvent::RunStatus {
            run_id: run_id.clone(),
            status,
            error,
        })
    }

    /// Persists a finished run's comments, failures and manifest.
    pub fn finish_run(&mut self, output: RunOutput) -> Result<RunStatus, ReviewError> {
        let run_id = output.manifest.run_id.clone();
        let run = self
            .state
            .runs
            .get(&run_id)
            .ok_or_else(|| ReviewError::UnknownRun(run_id.clone()))?;
        if run.status.is_finished() {
            return Err(ReviewError::Conflict(format!("run {run_id} already finished")));
        }
        let status = RunStatus::from_counts(output.comments.len(), output.failures.len());
        for c in output.comments {
            self.commit(StoreEvent::Comment(c))?;
        }
        for f in output.failures {
            self.commit(StoreEvent::Failure(f))?;
        }
        self.commit(StoreEvent::RunFinished {
            manifest: output.manifest,
            status,
        })?;
        Ok(status)
    }

    pub fn run(&self, id: &RunId) -> Option<&RunRecord> {
        self.state.runs.get(id)
    }

    pub fn runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.state.run_order.iter().map(|id| &self.state.runs[id])
    }

    pub fn comments_for_run(&self, run_id: &RunId) -> Vec<&FeedbackComment> {
        self.state
            .run_comments
            .get(run_id)
            .map(|ids| ids.iter().map(|id| &self.state.comments[id]).collect())
            .unwrap_or_default()
    }

    pub fn failures_for_run(&self, run_id: &RunId) -> &[FailedComment] {
        self.state
            .run_failures
            .get(run_id)
            .map(Vec::as_slice)
            .unwrap_or_default()
    }

    pub fn comment(&self, id: &CommentId) -> Option<&FeedbackComment> {
        self.state.comments.get(id)
    }

    /// Comments for an essay from the most recent finished run that
    /// covered it, or from `run_id` when given.
    pub fn essay_comments(
        &self,
        essay_id: &EssayId,
        run_id: Option<&RunId>,
    ) -> Vec<&FeedbackComment> {
        let pick = |run: &RunId| -> Vec<&FeedbackComment> {
            self.comments_for_run(run)
                .into_iter()
                .filter(|c| &c.essay_id == essay_id)
                .collect()
        };
        if let Some(run) = run_id {
            return pick(run);
        }
        self.state
            .run_order
            .iter()
            .rev()
            .filter(|id| self.state.runs[*id].status.is_finished())
            .map(pick)
            .find(|cs| !cs.is_empty())
            .unwrap_or_default()
    }

    /// Current comments across all essays of an assignment.
    pub fn assignment_comments(&self, assignment: &AssignmentId) -> Vec<&FeedbackComment> {
        self.essays()
            .filter(|e| &e.assignment_id == assignment)
            .flat_map(|e| self.essay_comments(&e.id, None))
            .collect()
    }

    // ---- review ----

    /// Appends a review action. Re-posting the disposition a reviewer
    /// already holds on a comment returns the existing action id without
    /// appending.
    pub fn record_action(&mut self, action: ReviewAction) -> Result<String, ReviewError> {
        let comment = self
            .state
            .comments
            .get(&action.comment_id)
            .ok_or_else(|| ReviewError::UnknownComment(action.comment_id.clone()))?;
        validate_action(&action, comment)?;
        let key = (action.comment_id.clone(), action.reviewer_id.clone());
        if let Some(state) = self.state.effective.get(&key) {
            let current = self.state.actions.iter().rev().find(|a| a.id == state.action_id);
            if current.is_some_and(|c| c.same_disposition(&action)) {
                return Ok(state.action_id.clone());
            }
        }
        let id = action.id.clone();
        self.commit(StoreEvent::Action(action))?;
        Ok(id)
    }

    pub fn actions(&self) -> &[ReviewAction] {
        &self.state.actions
    }

    pub fn effective(&self, comment: &CommentId, reviewer: &ReviewerId) -> Option<&EffectiveState> {
        self.state.effective.get(&(comment.clone(), reviewer.clone()))
    }

    /// Every reviewer's state on a comment.
    pub fn effective_states(&self, comment: &CommentId) -> Vec<&EffectiveState> {
        self.state
            .effective
            .range((comment.clone(), ReviewerId::from(""))..)
            .take_while(|((c, _), _)| c == comment)
            .map(|(_, s)| s)
            .collect()
    }

    /// State from the most recent action by any reviewer.
    pub fn latest_state(&self, comment: &CommentId) -> Option<&EffectiveState> {
        let idx = *self.state.latest_action.get(comment)?;
        let a = &self.state.actions[idx];
        self.effective(comment, &a.reviewer_id)
    }

    /// All effective states, keyed by (comment, reviewer).
    pub fn effective_map(&self) -> &BTreeMap<(CommentId, ReviewerId), EffectiveState> {
        &self.state.effective
    }

    fn verdicts(&self, rater: &Rater, comments: &[&FeedbackComment]) -> VerdictMap {
        comments
            .iter()
            .filter_map(|c| {
                let verdict = match rater {
                    Rater::Ai => Some(c.judgment.verdict),
                    Rater::Reviewer(r) => self.effective(&c.id, r).and_then(|s| s.verdict),
                }?;
                Some((ItemKey::new(c.essay_id.clone(), c.rubric_id.clone()), verdict))
            })
            .collect()
    }

    /// Agreement over the assignment's current comments that both raters
    /// have a verdict on. Dismissed comments carry no verdict.
    pub fn agreement(
        &self,
        assignment: &AssignmentId,
        a: Rater,
        b: Rater,
    ) -> Result<AgreementReport, ReviewError> {
        if self.assignment(assignment).is_none() {
            return Err(ReviewError::UnknownAssignment(assignment.clone()));
        }
        let comments = self.assignment_comments(assignment);
        let mut va = self.verdicts(&a, &comments);
        let mut vb = self.verdicts(&b, &comments);
        va.retain(|k, _| vb.contains_key(k));
        vb.retain(|k, _| va.contains_key(k));
        agreement_between(a, b, &va, &vb)
    }

    pub fn consistency(
        &self,
        reviewer: &ReviewerId,
        assignment: &AssignmentId,
    ) -> Result<ConsistencyReport, ReviewError> {
        let a = self
            .assignment(assignment)
            .ok_or_else(|| ReviewError::UnknownAssignment(assignment.clone()))?;
        let comments = self.assignment_comments(assignment);
        consistency_report(reviewer, assignment, &comments, &self.state.actions, &a.rubric_ids)
    }
}
