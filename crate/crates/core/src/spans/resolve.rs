use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::segment::Sentence;
use crate::model::{Essay, RubricId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchQuality {
    Exact,
    Normalized,
    Fuzzy { score: f64 },
    Unresolved,
}

impl MatchQuality {
    pub fn is_resolved(&self) -> bool {
        !matches!(self, MatchQuality::Unresolved)
    }

    pub fn label(&self) -> &'static str {
        match self {
            MatchQuality::Exact => "exact",
            MatchQuality::Normalized => "normalized",
            MatchQuality::Fuzzy { .. } => "fuzzy",
            MatchQuality::Unresolved => "unresolved",
        }
    }
}

/// Where a quoted piece of evidence sits in the essay. Unresolved spans have
/// `start == end == 0` and are treated as document-level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSpan {
    pub rubric_id: RubricId,
    pub start: usize,
    pub end: usize,
    pub quoted_text: String,
    pub match_quality: MatchQuality,
}

impl EvidenceSpan {
    pub fn unresolved(rubric_id: RubricId, quoted_text: impl Into<String>) -> Self {
        Self {
            rubric_id,
            start: 0,
            end: 0,
            quoted_text: quoted_text.into(),
            match_quality: MatchQuality::Unresolved,
        }
    }

    pub fn is_resolved(&self) -> bool {
        self.match_quality.is_resolved()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolveConfig {
    pub fuzzy_threshold: f64,
}

impl Default for ResolveConfig {
    fn default() -> Self {
        Self {
            fuzzy_threshold: 0.6,
        }
    }
}

pub fn resolve(rubric_id: &RubricId, quoted_text: &str, essay: &Essay) -> EvidenceSpan {
    resolve_with(rubric_id, quoted_text, essay, &ResolveConfig::default())
}

/// Locates a quote in the essay: exact substring, then normalized substring,
/// then best token-set Jaccard over single sentences and adjacent pairs.
/// Resolved spans are widened to whole sentences.
pub fn resolve_with(
    rubric_id: &RubricId,
    quoted_text: &str,
    essay: &Essay,
    config: &ResolveConfig,
) -> EvidenceSpan {
    let text = essay.text();
    let sentences = essay.sentences();
    let span = |start, end, match_quality| EvidenceSpan {
        rubric_id: rubric_id.clone(),
        start,
        end,
        quoted_text: quoted_text.to_string(),
        match_quality,
    };
    let unresolved = || EvidenceSpan::unresolved(rubric_id.clone(), quoted_text);

    let trimmed = quoted_text.trim();
    if trimmed.is_empty() || sentences.is_empty() {
        return unresolved();
    }

    if let Some(at) = text.find(trimmed) {
        if let Some((s, e)) = snap(sentences, at, at + trimmed.len()) {
            return span(s, e, MatchQuality::Exact);
        }
    }

    let needle = normalize_quote(quoted_text);
    if needle.is_empty() {
        return unresolved();
    }
    let hay = NormalizedText::new(text);
    if let Some(at) = hay.text.find(&needle) {
        let (s, e) = hay.source_range(at, at + needle.len());
        if let Some((s, e)) = snap(sentences, s, e) {
            return span(s, e, MatchQuality::Normalized);
        }
    }

    let quote_tokens = token_set(&needle);
    if quote_tokens.is_empty() {
        return unresolved();
    }
    let sentence_tokens: Vec<BTreeSet<String>> =
        sentences.iter().map(|s| token_set(&s.text)).collect();

    // (intersection, union, start, end); ratios compared by cross-multiplying
    let mut best: Option<(usize, usize, usize, usize)> = None;
    let mut consider = |tokens: &BTreeSet<String>, start: usize, end: usize| {
        let inter = tokens.intersection(&quote_tokens).count();
        let union = tokens.union(&quote_tokens).count();
        let better = match best {
            None => true,
            Some((bi, bu, _, _)) => inter * bu > bi * union,
        };
        if better {
            best = Some((inter, union, start, end));
        }
    };
    for (i, s) in sentences.iter().enumerate() {
        consider(&sentence_tokens[i], s.start, s.end);
        if let Some(next) = sentences.get(i + 1) {
            let pair: BTreeSet<String> = sentence_tokens[i]
                .union(&sentence_tokens[i + 1])
                .cloned()
                .collect();
            consider(&pair, s.start, next.end);
        }
    }

    match best {
        Some((inter, union, s, e)) if union > 0 => {
            let score = inter as f64 / union as f64;
            if score >= config.fuzzy_threshold {
                span(s, e, MatchQuality::Fuzzy { score })
            } else {
                unresolved()
            }
        }
        _ => unresolved(),
    }
}

/// Widens `[start, end)` to the first and last sentences it touches.
fn snap(sentences: &[Sentence], start: usize, end: usize) -> Option<(usize, usize)> {
    let mut hit = sentences.iter().filter(|s| s.end > start && s.start < end);
    let first = hit.next()?;
    let last = hit.next_back().unwrap_or(first);
    Some((first.start, last.end))
}

const QUOTE_MARKS: [char; 8] = [
    '"', '\'', '`', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}', '\u{00ab}',
];
const TRAILING_PUNCT: [char; 7] = ['.', '!', '?', ',', ';', ':', '\u{2026}'];

/// Case-folds, collapses whitespace runs and strips surrounding quote marks
/// and terminal punctuation.
pub fn normalize_quote(quote: &str) -> String {
    let mut q = quote.trim();
    loop {
        let next = q
            .trim_start_matches(|c: char| QUOTE_MARKS.contains(&c) || c == '\u{00bb}')
            .trim_end_matches(|c: char| {
                QUOTE_MARKS.contains(&c) || c == '\u{00bb}' || TRAILING_PUNCT.contains(&c)
            })
            .trim();
        if next.len() == q.len() {
            break;
        }
        q = next;
    }
    NormalizedText::new(q).text
}

/// Lowercased text with whitespace runs collapsed to one space, keeping a
/// byte-level map back to the source.
struct NormalizedText {
    text: String,
    src_start: Vec<usize>,
    src_end: Vec<usize>,
}

impl NormalizedText {
    fn new(source: &str) -> Self {
        let mut text = String::with_capacity(source.len());
        let mut src_start = Vec::with_capacity(source.len());
        let mut src_end = Vec::with_capacity(source.len());
        let mut in_space = false;
        for (pos, c) in source.char_indices() {
            let end = pos + c.len_utf8();
            if c.is_whitespace() {
                if in_space {
                    if let Some(last) = src_end.last_mut() {
                        *last = end;
                    }
                    continue;
                }
                in_space = true;
                text.push(' ');
                src_start.push(pos);
                src_end.push(end);
                continue;
            }
            in_space = false;
            for lc in c.to_lowercase() {
                for _ in 0..lc.len_utf8() {
                    src_start.push(pos);
                    src_end.push(end);
                }
                text.push(lc);
            }
        }
        Self {
            text,
            src_start,
            src_end,
        }
    }

    fn source_range(&self, start: usize, end: usize) -> (usize, usize) {
        (self.src_start[start], self.src_end[end - 1])
    }
}

/// Lowercased alphanumeric runs.
pub fn token_set(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}
