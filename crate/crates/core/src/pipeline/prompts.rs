use std::fmt::Write;

use crate::llm::{CompletionRequest, ResponseSchema};
use crate::model::{Essay, ExampleFeedback, Polarity, Rubric, Verdict};
use crate::spans::EvidenceSpan;

use super::PipelineConfig;

pub const DEFAULT_GUIDELINES: &str = "\
You write feedback for a student essay, one rubric item at a time.
- Refer to the student's own sentences and ideas; avoid generic remarks.
- If the rubric item is met, say clearly and warmly what the student did well.
- If the rubric item is missed, point to where the reasoning falls short and ask one or two questions that lead the student toward the fix. Do not state the correct answer.
- Keep the message to a few sentences addressed to the student.";

fn json_instruction(schema: ResponseSchema) -> String {
    format!(
        "Respond with only a JSON object of the form {}",
        schema.shape()
    )
}

pub fn render_rubric(rubric: &Rubric) -> String {
    let mut out = format!("Rubric item ({}): {}\n", rubric.short_name, rubric.criterion);
    if let Some(e) = &rubric.elaboration {
        if let Some(d) = &e.domain_definition {
            let _ = writeln!(out, "Domain definition: {d}");
        }
        if !e.acceptable_alternatives.is_empty() {
            let _ = writeln!(
                out,
                "Acceptable alternatives: {}",
                e.acceptable_alternatives.join("; ")
            );
        }
        if let Some(d) = &e.expected_depth {
            let _ = writeln!(out, "Expected depth: {d}");
        }
        if e.polarity == Polarity::ProhibitedBehavior {
            let _ = writeln!(
                out,
                "This item describes a behavior the student must avoid; it is met only when the behavior is absent."
            );
        }
    }
    out
}

fn render_evidence(evidence: &[EvidenceSpan]) -> String {
    if evidence.is_empty() {
        return "Evidence: (no sentences were identified)\n".to_string();
    }
    let mut out = String::from("Evidence:\n");
    for (i, e) in evidence.iter().enumerate() {
        let _ = writeln!(out, "{}. \"{}\"", i + 1, e.quoted_text);
    }
    out
}

fn render_essay(essay: &Essay) -> String {
    format!("Student essay:\n<<<\n{}\n>>>\n", essay.text())
}

fn request(config: &PipelineConfig, schema: ResponseSchema, system: String, user: String) -> CompletionRequest {
    CompletionRequest {
        temperature: config.temperature,
        max_retries: config.max_retries,
        ..CompletionRequest::new(schema, system, user)
    }
}

pub fn evidence_request(essay: &Essay, rubric: &Rubric, config: &PipelineConfig) -> CompletionRequest {
    let system = format!(
        "You help a teaching assistant grade essays against a rubric. Identify at most {} sentences from the student's essay that best show whether the essay meets or misses the rubric item. Copy each sentence exactly as written. Return an empty list if nothing in the essay is relevant.\n{}",
        config.max_quotes_per_rubric,
        json_instruction(ResponseSchema::EvidenceList)
    );
    let user = format!("{}\n{}", render_rubric(rubric), render_essay(essay));
    request(config, ResponseSchema::EvidenceList, system, user)
}

pub fn judgment_request(
    essay: &Essay,
    rubric: &Rubric,
    evidence: &[EvidenceSpan],
    config: &PipelineConfig,
) -> CompletionRequest {
    let system = format!(
        "You decide whether a student essay meets one rubric item. Base the decision on the evidence sentences and the full essay, and apply the rubric's definitions exactly as given.\n{}",
        json_instruction(ResponseSchema::Judgment)
    );
    let user = format!(
        "{}\n{}\n{}",
        render_rubric(rubric),
        render_evidence(evidence),
        render_essay(essay)
    );
    request(config, ResponseSchema::Judgment, system, user)
}

pub fn feedback_request(
    rubric: &Rubric,
    evidence: &[EvidenceSpan],
    verdict: Verdict,
    judgment_rationale: &str,
    examples: &[ExampleFeedback],
    config: &PipelineConfig,
) -> CompletionRequest {
    let mut system = config.guideline_text.clone();
    let shown: Vec<_> = examples.iter().take(config.few_shot_limit).collect();
    if !shown.is_empty() {
        system.push_str("\n\nExamples of feedback written by the instructor:\n");
        for (i, ex) in shown.iter().enumerate() {
            let _ = write!(
                system,
                "\nExample {}\nSituation: {}\nFeedback: {}\n",
                i + 1,
                ex.situation,
                ex.feedback_text
            );
        }
    }
    system.push('\n');
    system.push_str(&json_instruction(ResponseSchema::FeedbackMessage));

    let user = format!(
        "{}\n{}\nJudgment: {}\nReason: {}\n",
        render_rubric(rubric),
        render_evidence(evidence),
        verdict,
        judgment_rationale
    );
    request(config, ResponseSchema::FeedbackMessage, system, user)
}
