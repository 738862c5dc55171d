//! Heuristic checks that a rubric is specific enough for a model to grade.
//!
//! Each warning dimension corresponds to one elaboration suggestion: define
//! domain terms, list acceptable alternatives, pin the expected depth, and
//! phrase prohibited behaviors with an explicit negation.

use serde::{Deserialize, Serialize};

use crate::model::{Polarity, Rubric, RubricId};
use crate::spans::contains_word;

/// Ordered by the order warnings are emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LintDimension {
    MissingDomainDefinition,
    MissingAlternatives,
    UnspecifiedDepth,
    ImplicitNegativeBehavior,
}

impl LintDimension {
    pub fn as_str(self) -> &'static str {
        match self {
            LintDimension::MissingDomainDefinition => "missing_domain_definition",
            LintDimension::MissingAlternatives => "missing_alternatives",
            LintDimension::UnspecifiedDepth => "unspecified_depth",
            LintDimension::ImplicitNegativeBehavior => "implicit_negative_behavior",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintWarning {
    pub rubric_id: RubricId,
    pub dimension: LintDimension,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LintConfig {
    pub vague_depth_words: Vec<String>,
    pub negation_words: Vec<String>,
}

impl Default for LintConfig {
    fn default() -> Self {
        Self {
            vague_depth_words: ["conceptually", "thoughtful", "well-reasoned", "discuss"]
                .map(String::from)
                .to_vec(),
            negation_words: ["not", "no", "avoid", "without"].map(String::from).to_vec(),
        }
    }
}

pub fn lint_rubric(rubric: &Rubric) -> Vec<LintWarning> {
    lint_rubric_with(rubric, &LintConfig::default())
}

pub fn lint_rubric_with(rubric: &Rubric, config: &LintConfig) -> Vec<LintWarning> {
    let criterion = rubric.criterion.as_str();
    let lower = criterion.to_lowercase();
    let elaboration = rubric.elaboration.clone().unwrap_or_default();
    let mut out = Vec::new();
    let mut warn = |dimension, message: String| {
        out.push(LintWarning {
            rubric_id: rubric.id.clone(),
            dimension,
            message,
        })
    };

    if elaboration.domain_definition.is_none() {
        if let Some(term) = domain_term(criterion) {
            warn(
                LintDimension::MissingDomainDefinition,
                format!("criterion uses the domain term '{term}' but gives no definition"),
            );
        }
    }

    if elaboration.acceptable_alternatives.is_empty() {
        warn(
            LintDimension::MissingAlternatives,
            "no acceptable alternative answers are listed".to_string(),
        );
    }

    if elaboration.expected_depth.is_none() {
        if let Some(word) = config
            .vague_depth_words
            .iter()
            .find(|w| contains_word(&lower, &w.to_lowercase()))
        {
            warn(
                LintDimension::UnspecifiedDepth,
                format!("'{word}' does not say how deep the explanation must go"),
            );
        }
    }

    if rubric.polarity() == Polarity::ProhibitedBehavior
        && !config
            .negation_words
            .iter()
            .any(|w| contains_word(&lower, &w.to_lowercase()))
    {
        warn(
            LintDimension::ImplicitNegativeBehavior,
            "prohibited behavior is described without an explicit negation".to_string(),
        );
    }

    out
}

/// First quoted phrase, or first capitalized word that does not start a
/// sentence.
fn domain_term(criterion: &str) -> Option<String> {
    if let Some(q) = quoted_phrase(criterion) {
        return Some(q);
    }
    let mut sentence_start = true;
    for word in criterion.split_whitespace() {
        let core: String = word
            .trim_matches(|c: char| !c.is_alphanumeric())
            .to_string();
        let capitalized = core.chars().next().is_some_and(char::is_uppercase);
        if capitalized && !sentence_start && core != "I" {
            return Some(core);
        }
        if !core.is_empty() {
            sentence_start = word.ends_with(['.', '!', '?', ':']);
        }
    }
    None
}

fn quoted_phrase(s: &str) -> Option<String> {
    for (open, close) in [('"', '"'), ('\u{201c}', '\u{201d}'), ('\u{2018}', '\u{2019}')] {
        let Some(a) = s.find(open) else { continue };
        let rest = &s[a + open.len_utf8()..];
        if let Some(b) = rest.find(close) {
            let inner = rest[..b].trim();
            if !inner.is_empty() {
                return Some(inner.to_string());
            }
        }
    }
    // Straight single quotes only count when they open at a word start, so
    // possessives and contractions are ignored.
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    for (i, &(pos, c)) in chars.iter().enumerate() {
        let at_word_start = i == 0 || chars[i - 1].1.is_whitespace();
        if c == '\'' && at_word_start {
            let rest = &s[pos + 1..];
            for (off, _) in rest.match_indices('\'') {
                let after = rest[off + 1..].chars().next();
                if after.is_none_or(|ch| !ch.is_alphanumeric()) {
                    let inner = rest[..off].trim();
                    if !inner.is_empty() {
                        return Some(inner.to_string());
                    }
                }
            }
        }
    }
    None
}
