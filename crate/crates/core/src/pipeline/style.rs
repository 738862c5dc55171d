//! Checks on generated feedback wording.

use serde::{Deserialize, Serialize};

use crate::model::{Rubric, Verdict};
use crate::spans::contains_word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleIssue {
    /// Met verdict without any praise.
    MissingPraise,
    /// Missed verdict without a guiding question.
    MissingQuestion,
    /// Feedback copies the rubric's domain definition.
    RevealsAnswer,
}

const PRAISE: [&str; 12] = [
    "great", "good", "well done", "nice", "excellent", "strong", "clearly", "correctly",
    "effectively", "impressive", "solid", "well",
];

/// Runs of this many consecutive definition words count as revealing it.
const REVEAL_WINDOW: usize = 8;

pub fn check_style(verdict: Verdict, feedback: &str, rubric: &Rubric) -> Vec<StyleIssue> {
    let lower = feedback.to_lowercase();
    let mut issues = Vec::new();
    match verdict {
        Verdict::Met => {
            if !PRAISE.iter().any(|w| contains_word(&lower, w)) {
                issues.push(StyleIssue::MissingPraise);
            }
        }
        Verdict::Missed => {
            if !feedback.contains('?') {
                issues.push(StyleIssue::MissingQuestion);
            }
            let definition = rubric
                .elaboration
                .as_ref()
                .and_then(|e| e.domain_definition.as_deref());
            if let Some(def) = definition {
                if reveals(&lower, &def.to_lowercase()) {
                    issues.push(StyleIssue::RevealsAnswer);
                }
            }
        }
    }
    issues
}

fn words(s: &str) -> Vec<&str> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect()
}

fn reveals(feedback: &str, definition: &str) -> bool {
    let def = words(definition);
    if def.is_empty() {
        return false;
    }
    let fb = words(feedback);
    let window = REVEAL_WINDOW.min(def.len());
    def.windows(window)
        .any(|w| fb.windows(window).any(|f| f == w))
}
