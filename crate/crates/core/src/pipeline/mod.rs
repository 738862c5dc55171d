//! Per-rubric feedback generation.
//!
//! Each rubric is handled independently in up to three model calls:
//! evidence extraction, judgment, and (in `full_ai` mode) feedback
//! composition. Missed rubrics additionally pick up the instructor's
//! historic feedback. Every call's validated output is kept on the comment
//! as provenance.

mod prompts;
mod style;

use std::collections::HashMap;
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::llm::{CallContext, CompletionResult, Gateway, GatewayError, StructuredOutput};
use crate::model::{
    Assignment, AssignmentId, CommentId, Essay, EssayId, ExampleFeedback, Rubric, RubricId, RunId,
    Verdict,
};
use crate::par::{self, Execution};
use crate::spans::{resolve_with, EvidenceSpan, ResolveConfig};

pub use prompts::{
    evidence_request, feedback_request, judgment_request, render_rubric, DEFAULT_GUIDELINES,
};
pub use style::{check_style, StyleIssue};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    #[default]
    FullAi,
    JudgmentPlusHistoric,
}

impl PipelineMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full_ai" => Some(Self::FullAi),
            "judgment_plus_historic" => Some(Self::JudgmentPlusHistoric),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Evidence,
    Judgment,
    Feedback,
}

impl Step {
    pub fn as_str(self) -> &'static str {
        match self {
            Step::Evidence => "evidence",
            Step::Judgment => "judgment",
            Step::Feedback => "feedback",
        }
    }
}

/// How historic feedback is chosen when a rubric is missed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoricStrategy {
    #[default]
    FirstEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    pub max_quotes_per_rubric: usize,
    pub temperature: f64,
    pub max_retries: u32,
    pub guideline_text: String,
    pub few_shot_limit: usize,
    pub resolve: ResolveConfig,
    pub historic_strategy: HistoricStrategy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: PipelineMode::FullAi,
            max_quotes_per_rubric: 3,
            temperature: crate::llm::DEFAULT_TEMPERATURE,
            max_retries: crate::llm::DEFAULT_MAX_RETRIES,
            guideline_text: DEFAULT_GUIDELINES.to_string(),
            few_shot_limit: 4,
            resolve: ResolveConfig::default(),
            historic_strategy: HistoricStrategy::FirstEntry,
        }
    }
}

impl PipelineConfig {
    pub fn with_mode(mode: PipelineMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_quotes_per_rubric == 0 {
            return Err("max_quotes_per_rubric must be positive".into());
        }
        if self.few_shot_limit == 0 {
            return Err("few_shot_limit must be positive".into());
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err("temperature must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub rubric_id: RubricId,
    pub verdict: Verdict,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub step: Step,
    pub result: CompletionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackComment {
    pub id: CommentId,
    pub run_id: RunId,
    pub essay_id: EssayId,
    pub rubric_id: RubricId,
    pub anchor: EvidenceSpan,
    pub supporting_spans: Vec<EvidenceSpan>,
    pub judgment: Judgment,
    pub ai_feedback: String,
    pub historic_feedback: Option<String>,
    pub rationale: String,
    pub pipeline_mode: PipelineMode,
    pub provenance: Vec<ProvenanceEntry>,
}

/// A rubric whose pipeline stopped at `step`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedComment {
    pub run_id: RunId,
    pub essay_id: EssayId,
    pub rubric_id: RubricId,
    pub step: Step,
    pub error: GatewayError,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{step:?} step failed: {error}")]
pub struct StepError {
    pub step: Step,
    pub error: GatewayError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTiming {
    pub essay_id: EssayId,
    pub rubric_id: RubricId,
    pub step: Step,
    pub millis: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleWarning {
    pub essay_id: EssayId,
    pub rubric_id: RubricId,
    pub issue: StyleIssue,
}

/// Reproducibility record written next to a run's comments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: RunId,
    pub assignment_id: AssignmentId,
    pub essay_ids: Vec<EssayId>,
    pub provider_name: String,
    pub config: PipelineConfig,
    /// What the judgment step is shown.
    pub judgment_input: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub comment_count: usize,
    pub failure_count: usize,
    pub timings: Vec<StepTiming>,
    pub style_warnings: Vec<StyleWarning>,
}

pub const JUDGMENT_INPUT: &str = "rubric with elaboration, evidence quotes, full essay";

pub type RubricResult = Result<FeedbackComment, FailedComment>;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub comments: Vec<FeedbackComment>,
    pub failures: Vec<FailedComment>,
}

struct RubricOutcome {
    result: RubricResult,
    timings: Vec<StepTiming>,
    style: Vec<StyleIssue>,
}

pub fn comment_id(run_id: &RunId, essay_id: &EssayId, rubric_id: &RubricId) -> CommentId {
    // lengths keep "a/bc" and "ab/c" distinct
    let key = format!(
        "{}:{}|{}:{}|{}:{}",
        run_id.0.len(),
        run_id,
        essay_id.0.len(),
        essay_id,
        rubric_id.0.len(),
        rubric_id
    );
    CommentId(Uuid::new_v5(&Uuid::NAMESPACE_OID, key.as_bytes()).to_string())
}

/// Historic feedback for a missed rubric, if the instructor wrote any.
pub fn retrieve_historic(rubric: &Rubric, judgment: &Judgment) -> Option<String> {
    retrieve_historic_with(rubric, judgment, HistoricStrategy::FirstEntry)
}

pub fn retrieve_historic_with(
    rubric: &Rubric,
    judgment: &Judgment,
    strategy: HistoricStrategy,
) -> Option<String> {
    if judgment.verdict != Verdict::Missed {
        return None;
    }
    match strategy {
        HistoricStrategy::FirstEntry => rubric.historic_feedback.first().cloned(),
    }
}

/// One grading run: a gateway, a configuration and a run id.
pub struct Pipeline {
    run_id: RunId,
    gateway: Gateway,
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(run_id: RunId, gateway: Gateway, config: PipelineConfig) -> Self {
        Self {
            run_id,
            gateway,
            config,
        }
    }

    pub fn run_id(&self) -> &RunId {
        &self.run_id
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn call(
        &self,
        step: Step,
        request: &crate::llm::CompletionRequest,
        essay: &Essay,
        rubric: &Rubric,
    ) -> Result<CompletionResult, StepError> {
        self.gateway
            .complete(request, CallContext { rubric, essay })
            .map_err(|error| StepError { step, error })
    }

    /// Asks for verbatim quotes and anchors each one. Resolved spans come
    /// first in essay order (duplicates dropped), then unresolved quotes in
    /// the order the provider gave them.
    pub fn extract_evidence(
        &self,
        essay: &Essay,
        rubric: &Rubric,
    ) -> Result<(Vec<EvidenceSpan>, CompletionResult), StepError> {
        let request = evidence_request(essay, rubric, &self.config);
        let result = self.call(Step::Evidence, &request, essay, rubric)?;
        let StructuredOutput::EvidenceList(out) = &result.parsed else {
            unreachable!("gateway validated the evidence schema");
        };
        let spans: Vec<EvidenceSpan> = out
            .quotes
            .iter()
            .take(self.config.max_quotes_per_rubric)
            .map(|q| resolve_with(&rubric.id, q, essay, &self.config.resolve))
            .collect();
        Ok((order_evidence(spans), result))
    }

    pub fn judge(
        &self,
        essay: &Essay,
        rubric: &Rubric,
        evidence: &[EvidenceSpan],
    ) -> Result<(Judgment, CompletionResult), StepError> {
        let request = judgment_request(essay, rubric, evidence, &self.config);
        let result = self.call(Step::Judgment, &request, essay, rubric)?;
        let StructuredOutput::Judgment(out) = &result.parsed else {
            unreachable!("gateway validated the judgment schema");
        };
        let judgment = Judgment {
            rubric_id: rubric.id.clone(),
            verdict: out.verdict,
            rationale: out.rationale.clone(),
        };
        Ok((judgment, result))
    }

    /// Returns the feedback message and the model's rationale for it.
    pub fn compose_feedback(
        &self,
        essay: &Essay,
        rubric: &Rubric,
        evidence: &[EvidenceSpan],
        judgment: &Judgment,
        examples: &[ExampleFeedback],
    ) -> Result<((String, String), CompletionResult), StepError> {
        let request = feedback_request(
            rubric,
            evidence,
            judgment.verdict,
            &judgment.rationale,
            examples,
            &self.config,
        );
        let result = self.call(Step::Feedback, &request, essay, rubric)?;
        let StructuredOutput::FeedbackMessage(out) = &result.parsed else {
            unreachable!("gateway validated the feedback schema");
        };
        Ok(((out.feedback.clone(), out.rationale.clone()), result))
    }

    #[allow(clippy::result_large_err)]
    pub fn run_rubric(
        &self,
        essay: &Essay,
        rubric: &Rubric,
        examples: &[ExampleFeedback],
    ) -> RubricResult {
        self.run_rubric_timed(essay, rubric, examples).result
    }

    fn run_rubric_timed(
        &self,
        essay: &Essay,
        rubric: &Rubric,
        examples: &[ExampleFeedback],
    ) -> RubricOutcome {
        let mut timings = Vec::new();
        let mut style = Vec::new();
        let mut timed = |step: Step, started: Instant| {
            timings.push(StepTiming {
                essay_id: essay.id.clone(),
                rubric_id: rubric.id.clone(),
                step,
                millis: started.elapsed().as_secs_f64() * 1000.0,
            })
        };

        let result = (|| {
            let mut provenance = Vec::with_capacity(3);

            let t = Instant::now();
            let (evidence, r) = self.extract_evidence(essay, rubric)?;
            timed(Step::Evidence, t);
            provenance.push(ProvenanceEntry {
                step: Step::Evidence,
                result: r,
            });

            let t = Instant::now();
            let (judgment, r) = self.judge(essay, rubric, &evidence)?;
            timed(Step::Judgment, t);
            provenance.push(ProvenanceEntry {
                step: Step::Judgment,
                result: r,
            });

            let (ai_feedback, rationale) = match self.config.mode {
                PipelineMode::FullAi => {
                    let t = Instant::now();
                    let ((text, why), r) =
                        self.compose_feedback(essay, rubric, &evidence, &judgment, examples)?;
                    timed(Step::Feedback, t);
                    provenance.push(ProvenanceEntry {
                        step: Step::Feedback,
                        result: r,
                    });
                    style = check_style(judgment.verdict, &text, rubric);
                    let why = if why.trim().is_empty() {
                        judgment.rationale.clone()
                    } else {
                        why
                    };
                    (text, why)
                }
                PipelineMode::JudgmentPlusHistoric => (String::new(), judgment.rationale.clone()),
            };

            let historic_feedback =
                retrieve_historic_with(rubric, &judgment, self.config.historic_strategy);

            let mut spans = evidence.into_iter();
            let anchor = spans
                .next()
                .unwrap_or_else(|| EvidenceSpan::unresolved(rubric.id.clone(), ""));
            Ok(FeedbackComment {
                id: comment_id(&self.run_id, &essay.id, &rubric.id),
                run_id: self.run_id.clone(),
                essay_id: essay.id.clone(),
                rubric_id: rubric.id.clone(),
                anchor,
                supporting_spans: spans.collect(),
                judgment,
                ai_feedback,
                historic_feedback,
                rationale,
                pipeline_mode: self.config.mode,
                provenance,
            })
        })()
        .map_err(|e: StepError| FailedComment {
            run_id: self.run_id.clone(),
            essay_id: essay.id.clone(),
            rubric_id: rubric.id.clone(),
            step: e.step,
            error: e.error,
        });

        if let Err(f) = &result {
            tracing::warn!(essay = %f.essay_id, rubric = %f.rubric_id, step = ?f.step, error = %f.error, "rubric failed");
        }
        RubricOutcome {
            result,
            timings,
            style,
        }
    }

    /// All rubrics of the assignment for one essay, in assignment order.
    #[allow(clippy::result_large_err)]
    pub fn run_essay(
        &self,
        essay: &Essay,
        assignment: &Assignment,
        rubrics: &[Rubric],
    ) -> Vec<RubricResult> {
        let ordered = ordered_rubrics(assignment, rubrics);
        par::map(&ordered, Execution::Parallel, |r| {
            self.run_rubric(essay, r, &assignment.few_shot_examples)
        })
    }

    pub fn run_batch(&self, assignment: &Assignment, rubrics: &[Rubric], essays: &[Essay]) -> RunOutput {
        self.run_batch_with(assignment, rubrics, essays, Execution::Parallel)
    }

    /// Every (essay, rubric) pair of the batch. Output is ordered by essay,
    /// then by the assignment's rubric order, regardless of execution.
    pub fn run_batch_with(
        &self,
        assignment: &Assignment,
        rubrics: &[Rubric],
        essays: &[Essay],
        execution: Execution,
    ) -> RunOutput {
        let started_at = Utc::now();
        let ordered = ordered_rubrics(assignment, rubrics);
        let tasks: Vec<(&Essay, &Rubric)> = essays
            .iter()
            .flat_map(|e| ordered.iter().map(move |r| (e, *r)))
            .collect();
        let outcomes = par::map(&tasks, execution, |(e, r)| {
            self.run_rubric_timed(e, r, &assignment.few_shot_examples)
        });

        let mut comments = Vec::new();
        let mut failures = Vec::new();
        let mut timings = Vec::new();
        let mut style_warnings = Vec::new();
        for ((essay, rubric), outcome) in tasks.iter().zip(outcomes) {
            timings.extend(outcome.timings);
            for issue in outcome.style {
                if let Some(audit) = self.gateway.audit() {
                    audit.record_warning(
                        "feedback_style",
                        serde_json::json!({"essay_id": essay.id, "rubric_id": rubric.id, "issue": issue}),
                    );
                }
                style_warnings.push(StyleWarning {
                    essay_id: essay.id.clone(),
                    rubric_id: rubric.id.clone(),
                    issue,
                });
            }
            match outcome.result {
                Ok(c) => comments.push(c),
                Err(f) => failures.push(f),
            }
        }

        let manifest = RunManifest {
            run_id: self.run_id.clone(),
            assignment_id: assignment.id.clone(),
            essay_ids: essays.iter().map(|e| e.id.clone()).collect(),
            provider_name: self.gateway.provider_name().to_string(),
            config: self.config.clone(),
            judgment_input: JUDGMENT_INPUT.to_string(),
            started_at,
            finished_at: Utc::now(),
            comment_count: comments.len(),
            failure_count: failures.len(),
            timings,
            style_warnings,
        };
        RunOutput {
            manifest,
            comments,
            failures,
        }
    }
}

fn ordered_rubrics<'a>(assignment: &Assignment, rubrics: &'a [Rubric]) -> Vec<&'a Rubric> {
    let by_id: HashMap<&RubricId, &Rubric> = rubrics.iter().map(|r| (&r.id, r)).collect();
    assignment
        .rubric_ids
        .iter()
        .filter_map(|id| {
            let found = by_id.get(id).copied();
            if found.is_none() {
                tracing::warn!(rubric = %id, "assignment references an unknown rubric");
            }
            found
        })
        .collect()
}

fn order_evidence(spans: Vec<EvidenceSpan>) -> Vec<EvidenceSpan> {
    let (mut resolved, unresolved): (Vec<_>, Vec<_>) =
        spans.into_iter().partition(EvidenceSpan::is_resolved);
    resolved.sort_by_key(|s| (s.start, s.end));
    resolved.dedup_by_key(|s| (s.start, s.end));
    resolved.extend(unresolved);
    resolved
}
