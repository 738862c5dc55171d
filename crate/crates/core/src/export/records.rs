//! Flat JSON-lines records for a run: one `comment` record per generated
//! comment and one `failure` record per failed rubric.

use serde::{Deserialize, Serialize};

use crate::llm::GatewayError;
use crate::model::{CommentId, EssayId, RubricId, RunId, Verdict};
use crate::pipeline::{FailedComment, FeedbackComment, Judgment, PipelineMode, ProvenanceEntry, Step};
use crate::spans::{EvidenceSpan, MatchQuality};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub comment_id: CommentId,
    pub run_id: RunId,
    pub essay_id: EssayId,
    pub rubric_id: RubricId,
    pub anchor_start: usize,
    pub anchor_end: usize,
    pub anchor_quoted_text: String,
    pub anchor_match: String,
    pub anchor_match_score: Option<f64>,
    pub supporting_spans: Vec<EvidenceSpan>,
    pub verdict: Verdict,
    pub judgment_rationale: String,
    pub ai_feedback: String,
    pub historic_feedback: Option<String>,
    pub rationale: String,
    pub pipeline_mode: PipelineMode,
    pub provenance: Vec<ProvenanceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub run_id: RunId,
    pub essay_id: EssayId,
    pub rubric_id: RubricId,
    pub step: Step,
    pub error: GatewayError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Comment(CommentRecord),
    Failure(FailureRecord),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown match kind {kind:?}")]
    UnknownMatch { line: usize, kind: String },
}

impl From<&FeedbackComment> for CommentRecord {
    fn from(c: &FeedbackComment) -> Self {
        let score = match c.anchor.match_quality {
            MatchQuality::Fuzzy { score } => Some(score),
            _ => None,
        };
        Self {
            comment_id: c.id.clone(),
            run_id: c.run_id.clone(),
            essay_id: c.essay_id.clone(),
            rubric_id: c.rubric_id.clone(),
            anchor_start: c.anchor.start,
            anchor_end: c.anchor.end,
            anchor_quoted_text: c.anchor.quoted_text.clone(),
            anchor_match: c.anchor.match_quality.label().to_string(),
            anchor_match_score: score,
            supporting_spans: c.supporting_spans.clone(),
            verdict: c.judgment.verdict,
            judgment_rationale: c.judgment.rationale.clone(),
            ai_feedback: c.ai_feedback.clone(),
            historic_feedback: c.historic_feedback.clone(),
            rationale: c.rationale.clone(),
            pipeline_mode: c.pipeline_mode,
            provenance: c.provenance.clone(),
        }
    }
}

impl CommentRecord {
    fn into_comment(self, line: usize) -> Result<FeedbackComment, RecordError> {
        let match_quality = match (self.anchor_match.as_str(), self.anchor_match_score) {
            ("exact", _) => MatchQuality::Exact,
            ("normalized", _) => MatchQuality::Normalized,
            ("fuzzy", Some(score)) => MatchQuality::Fuzzy { score },
            ("unresolved", _) => MatchQuality::Unresolved,
            (kind, _) => {
                return Err(RecordError::UnknownMatch {
                    line,
                    kind: kind.to_string(),
                })
            }
        };
        Ok(FeedbackComment {
            id: self.comment_id,
            run_id: self.run_id,
            essay_id: self.essay_id,
            rubric_id: self.rubric_id.clone(),
            anchor: EvidenceSpan {
                rubric_id: self.rubric_id.clone(),
                start: self.anchor_start,
                end: self.anchor_end,
                quoted_text: self.anchor_quoted_text,
                match_quality,
            },
            supporting_spans: self.supporting_spans,
            judgment: Judgment {
                rubric_id: self.rubric_id,
                verdict: self.verdict,
                rationale: self.judgment_rationale,
            },
            ai_feedback: self.ai_feedback,
            historic_feedback: self.historic_feedback,
            rationale: self.rationale,
            pipeline_mode: self.pipeline_mode,
            provenance: self.provenance,
        })
    }
}

impl From<&FailedComment> for FailureRecord {
    fn from(f: &FailedComment) -> Self {
        Self {
            run_id: f.run_id.clone(),
            essay_id: f.essay_id.clone(),
            rubric_id: f.rubric_id.clone(),
            step: f.step,
            error: f.error.clone(),
        }
    }
}

impl From<FailureRecord> for FailedComment {
    fn from(f: FailureRecord) -> Self {
        Self {
            run_id: f.run_id,
            essay_id: f.essay_id,
            rubric_id: f.rubric_id,
            step: f.step,
            error: f.error,
        }
    }
}

/// Comments first, then failures, each in the given order.
pub fn export_records(comments: &[&FeedbackComment], failures: &[FailedComment]) -> String {
    let mut out = String::new();
    let records = comments
        .iter()
        .map(|c| Record::Comment(CommentRecord::from(*c)))
        .chain(failures.iter().map(|f| Record::Failure(FailureRecord::from(f))));
    for record in records {
        out.push_str(&serde_json::to_string(&record).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn import_records(
    text: &str,
) -> Result<(Vec<FeedbackComment>, Vec<FailedComment>), RecordError> {
    let mut comments = Vec::new();
    let mut failures = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|e| RecordError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        match record {
            Record::Comment(c) => comments.push(c.into_comment(i + 1)?),
            Record::Failure(f) => failures.push(f.into()),
        }
    }
    Ok((comments, failures))
}
