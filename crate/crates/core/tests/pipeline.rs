mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::*;
use marginalia_core::llm::{
    AuditLog, CallContext, CompletionRequest, Gateway, GatewayConfig, GatewayError, Provider,
    ReplayProvider, ResponseSchema, TransportError,
};
use marginalia_core::model::{RunId, Verdict};
use marginalia_core::pipeline::{Pipeline, PipelineConfig, PipelineMode, Step};
use marginalia_core::spans::MatchQuality;
use marginalia_core::Execution;

fn mock_pipeline(mode: PipelineMode) -> Pipeline {
    Pipeline::new(RunId::from("run-t"), Gateway::mock(), PipelineConfig::with_mode(mode))
}

#[test]
fn mock_batch_verdicts_follow_keywords() {
    let out = mock_pipeline(PipelineMode::FullAi).run_batch(
        &econ_assignment(),
        &econ_rubrics(),
        &econ_essays(),
    );
    assert_eq!(out.comments.len(), 30);
    let met: Vec<String> = out
        .comments
        .iter()
        .filter(|c| c.judgment.verdict == Verdict::Met)
        .map(|c| format!("{}/{}", c.essay_id, c.rubric_id))
        .collect();
    assert_eq!(
        met,
        [
            "E1/R1", "E1/R2", "E1/R3", "E1/R4", "E1/R5", "E1/R6", "E2/R1", "E2/R3", "E2/R5",
            "E3/R2", "E3/R4", "E3/R6", "E4/R4",
        ]
    );
}

#[test]
fn missed_with_partial_match_points_at_missing_group() {
    let out = mock_pipeline(PipelineMode::FullAi).run_batch(
        &econ_assignment(),
        &econ_rubrics(),
        &econ_essays(),
    );
    let c = out
        .comments
        .iter()
        .find(|c| c.essay_id.as_str() == "E4" && c.rubric_id.as_str() == "R1")
        .unwrap();
    assert_eq!(c.judgment.verdict, Verdict::Missed);
    assert!(c.judgment.rationale.contains("Missing: consume"), "{}", c.judgment.rationale);
    assert!(c.ai_feedback.contains('?'));
    assert_eq!(&c.anchor.quoted_text, "The fish are rival goods.");
    assert_eq!(c.anchor.match_quality, MatchQuality::Exact);
}

#[test]
fn judgment_only_mode_has_two_steps_and_no_ai_text() {
    let out = mock_pipeline(PipelineMode::JudgmentPlusHistoric).run_batch(
        &econ_assignment(),
        &econ_rubrics(),
        &econ_essays(),
    );
    for c in &out.comments {
        assert_eq!(c.provenance.len(), 2);
        assert!(c.ai_feedback.is_empty());
        assert_eq!(c.provenance[1].step, Step::Judgment);
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let p = mock_pipeline(PipelineMode::FullAi);
    let (a, r, e) = (econ_assignment(), econ_rubrics(), econ_essays());
    let seq = p.run_batch_with(&a, &r, &e, Execution::Sequential);
    let par = p.run_batch_with(&a, &r, &e, Execution::Parallel);
    assert_eq!(seq.comments, par.comments);
}

#[test]
fn paper_transcript_reproduces_quoted_texts() {
    let (assignment, rubrics, essay) = externality_fixture();
    let provider = ReplayProvider::from_file(fixture_path("externality_transcript.jsonl")).unwrap();
    let gateway = Gateway::new(Arc::new(provider), &GatewayConfig::default());
    let pipeline = Pipeline::new("run-ext".into(), gateway, PipelineConfig::default());
    let out = pipeline.run_batch(&assignment, &rubrics, std::slice::from_ref(&essay));
    assert!(out.failures.is_empty());
    let c = &out.comments[0];
    assert_eq!(c.judgment.verdict, Verdict::Missed);
    assert_eq!(c.ai_feedback, EXTERNALITY_AI_FEEDBACK);
    assert_eq!(c.historic_feedback.as_deref(), Some(EXTERNALITY_HISTORIC));
    assert_eq!(&essay.text()[c.anchor.start..c.anchor.end], EXTERNALITY_SENTENCE);
    assert_eq!(c.anchor.match_quality, MatchQuality::Exact);
    assert_eq!(rubrics[0].criterion, EXTERNALITY_RUBRIC);
    assert_eq!(out.manifest.provider_name, "replay:externality_transcript");
}

#[test]
fn paraphrased_quote_resolves_fuzzy() {
    let (assignment, rubrics, essay) = externality_fixture();
    let provider =
        ReplayProvider::from_file(fixture_path("externality_paraphrase_transcript.jsonl")).unwrap();
    let gateway = Gateway::new(Arc::new(provider), &GatewayConfig::default());
    let pipeline = Pipeline::new("run-para".into(), gateway, PipelineConfig::default());
    let out = pipeline.run_batch(&assignment, &rubrics, std::slice::from_ref(&essay));
    let c = &out.comments[0];
    let expected = oracle_jaccard(&c.anchor.quoted_text, EXTERNALITY_SENTENCE);
    assert!(expected >= 0.6);
    match c.anchor.match_quality {
        MatchQuality::Fuzzy { score } => assert!((score - expected).abs() < 1e-9),
        other => panic!("expected fuzzy, got {other:?}"),
    }
    assert_eq!(&essay.text()[c.anchor.start..c.anchor.end], EXTERNALITY_SENTENCE);
    // the judgment reply had prose around its JSON and still validated first time
    assert_eq!(c.provenance[1].result.attempt_count, 1);
}

/// Always returns garbage for one schema and defers to the mock otherwise.
struct Faulty {
    bad: ResponseSchema,
    calls: AtomicUsize,
}

impl Provider for Faulty {
    fn name(&self) -> &str {
        "faulty"
    }

    fn send(&self, req: &CompletionRequest, ctx: CallContext<'_>) -> Result<String, TransportError> {
        if req.response_schema == self.bad {
            self.calls.fetch_add(1, Ordering::SeqCst);
            return Ok("I'd rather not answer in JSON.".into());
        }
        Ok(marginalia_core::llm::mock_complete(req, ctx.rubric, ctx.essay).raw_text)
    }
}

#[test]
fn failing_step_is_isolated_to_its_rubric() {
    let provider = Arc::new(Faulty {
        bad: ResponseSchema::FeedbackMessage,
        calls: AtomicUsize::new(0),
    });
    let gateway = Gateway::new(provider.clone(), &GatewayConfig::default());
    let pipeline = Pipeline::new("run-f".into(), gateway, PipelineConfig::default());
    let essays = econ_essays();
    let out = pipeline.run_batch(&econ_assignment(), &econ_rubrics(), &essays[..1]);
    assert!(out.comments.is_empty());
    assert_eq!(out.failures.len(), 6);
    assert_eq!(provider.calls.load(Ordering::SeqCst), 6 * 3);
    for f in &out.failures {
        assert_eq!(f.step, Step::Feedback);
        match &f.error {
            GatewayError::SchemaViolation { raw_attempts, .. } => assert_eq!(raw_attempts.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }
    // judgment-only mode never calls the broken step
    let gateway = Gateway::new(provider, &GatewayConfig::default());
    let pipeline = Pipeline::new(
        "run-g".into(),
        gateway,
        PipelineConfig::with_mode(PipelineMode::JudgmentPlusHistoric),
    );
    let out = pipeline.run_batch(&econ_assignment(), &econ_rubrics(), &essays[..1]);
    assert_eq!(out.comments.len(), 6);
}

struct Down;

impl Provider for Down {
    fn name(&self) -> &str {
        "down"
    }

    fn send(&self, _: &CompletionRequest, _: CallContext<'_>) -> Result<String, TransportError> {
        Err(TransportError("connection refused".into()))
    }
}

#[test]
fn unreachable_provider_fails_at_evidence() {
    let gateway = Gateway::new(Arc::new(Down), &GatewayConfig::default());
    let pipeline = Pipeline::new("run-d".into(), gateway, PipelineConfig::default());
    let essays = econ_essays();
    let out = pipeline.run_batch(&econ_assignment(), &econ_rubrics(), &essays[..2]);
    assert_eq!(out.failures.len(), 12);
    assert!(out.failures.iter().all(|f| f.step == Step::Evidence
        && matches!(f.error, GatewayError::ProviderUnreachable { attempts: 3, .. })));
    assert_eq!(out.manifest.failure_count, 12);
}

#[test]
fn audit_log_has_one_line_per_attempt() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.jsonl");
    let audit = Arc::new(AuditLog::open(&path).unwrap());
    let gateway = Gateway::mock().with_audit(audit);
    let pipeline = Pipeline::new("run-a".into(), gateway, PipelineConfig::default());
    let essays = econ_essays();
    pipeline.run_batch(&econ_assignment(), &econ_rubrics(), &essays[..1]);
    let text = std::fs::read_to_string(&path).unwrap();
    let attempts = text
        .lines()
        .filter(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["type"] == "attempt")
        .count();
    assert_eq!(attempts, 6 * 3);
}

#[test]
fn manifest_records_configuration() {
    let out = mock_pipeline(PipelineMode::FullAi).run_batch(
        &econ_assignment(),
        &econ_rubrics(),
        &econ_essays(),
    );
    let m = &out.manifest;
    assert_eq!(m.comment_count, 30);
    assert_eq!(m.provider_name, "mock");
    assert_eq!(m.essay_ids.len(), 5);
    assert_eq!(m.config, PipelineConfig::default());
    assert!(m.judgment_input.contains("essay"));
    assert_eq!(m.timings.len(), 90);
}
