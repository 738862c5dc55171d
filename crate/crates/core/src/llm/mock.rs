//! Rule-based provider for deterministic tests and demos.
//!
//! Answers are a pure function of the rubric's keyword groups and the essay's
//! sentences: a group is matched by the first sentence containing any of its
//! terms as a whole word (case-insensitive).

use super::{
    CallContext, CompletionRequest, CompletionResult, EvidenceOutput, FeedbackOutput,
    JudgmentOutput, Provider, ResponseSchema, StructuredOutput, TransportError,
};
use crate::model::{Essay, Rubric, Verdict};
use crate::spans::contains_word;

pub const MOCK_PROVIDER_NAME: &str = "mock";

#[derive(Debug, Clone, Copy, Default)]
pub struct MockProvider;

impl Provider for MockProvider {
    fn name(&self) -> &str {
        MOCK_PROVIDER_NAME
    }

    fn send(
        &self,
        request: &CompletionRequest,
        ctx: CallContext<'_>,
    ) -> Result<String, TransportError> {
        Ok(mock_complete(request, ctx.rubric, ctx.essay).raw_text)
    }
}

struct GroupMatch<'a> {
    group: &'a [String],
    sentence: Option<usize>,
}

fn match_groups<'a>(rubric: &'a Rubric, essay: &Essay) -> Vec<GroupMatch<'a>> {
    let lowered: Vec<String> = essay
        .sentences()
        .iter()
        .map(|s| s.text.to_lowercase())
        .collect();
    rubric
        .keyword_groups
        .iter()
        .map(|group| GroupMatch {
            group,
            sentence: lowered.iter().position(|s| {
                group
                    .iter()
                    .any(|term| contains_word(s, &term.trim().to_lowercase()))
            }),
        })
        .collect()
}

fn verdict_of(matches: &[GroupMatch<'_>]) -> Verdict {
    if !matches.is_empty() && matches.iter().all(|m| m.sentence.is_some()) {
        Verdict::Met
    } else {
        Verdict::Missed
    }
}

fn group_label(group: &[String]) -> String {
    group.join("/")
}

/// The mock's answer for one request.
pub fn mock_complete(request: &CompletionRequest, rubric: &Rubric, essay: &Essay) -> CompletionResult {
    let matches = match_groups(rubric, essay);
    let verdict = verdict_of(&matches);
    let rationale = if matches.is_empty() {
        "No keyword groups are configured for this rubric.".to_string()
    } else {
        let list = |want: bool| {
            let labels: Vec<String> = matches
                .iter()
                .filter(|m| m.sentence.is_some() == want)
                .map(|m| group_label(m.group))
                .collect();
            if labels.is_empty() {
                "none".to_string()
            } else {
                labels.join(", ")
            }
        };
        format!("Matched: {}. Missing: {}.", list(true), list(false))
    };

    let parsed = match request.response_schema {
        ResponseSchema::EvidenceList => {
            let mut hits: Vec<usize> = matches.iter().filter_map(|m| m.sentence).collect();
            hits.sort_unstable();
            hits.dedup();
            StructuredOutput::EvidenceList(EvidenceOutput {
                quotes: hits
                    .into_iter()
                    .map(|i| essay.sentences()[i].text.clone())
                    .collect(),
            })
        }
        ResponseSchema::Judgment => StructuredOutput::Judgment(JudgmentOutput { verdict, rationale }),
        ResponseSchema::FeedbackMessage => {
            let feedback = match verdict {
                Verdict::Met => format!(
                    "Great work: {}.",
                    rubric.criterion.trim().trim_end_matches(['.', '!', '?'])
                ),
                Verdict::Missed => {
                    let term = matches
                        .iter()
                        .find(|m| m.sentence.is_none())
                        .and_then(|m| m.group.first())
                        .map(String::as_str)
                        .unwrap_or(rubric.short_name.as_str());
                    format!("Consider: what role does '{term}' play here?")
                }
            };
            StructuredOutput::FeedbackMessage(FeedbackOutput {
                feedback,
                rationale: format!("Verdict {verdict}. {rationale}"),
            })
        }
    };

    let raw_text = match &parsed {
        StructuredOutput::EvidenceList(o) => serde_json::to_string(o),
        StructuredOutput::Judgment(o) => serde_json::to_string(o),
        StructuredOutput::FeedbackMessage(o) => serde_json::to_string(o),
    }
    .expect("mock output serializes");

    CompletionResult {
        parsed,
        raw_text,
        provider_name: MOCK_PROVIDER_NAME.to_string(),
        attempt_count: 1,
    }
}
