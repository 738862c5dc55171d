//! Sentence segmentation and quote anchoring.
//!
//! All offsets are UTF-8 byte offsets into the essay text and always fall on
//! character boundaries.

mod resolve;
mod segment;

pub use resolve::{
    jaccard, normalize_quote, resolve, resolve_with, token_set, EvidenceSpan, MatchQuality,
    ResolveConfig,
};
pub use segment::{segment, segment_with, SegmentConfig, Sentence};

/// Whole-word containment. Both arguments are expected to be lowercase
/// already; a match must not be preceded or followed by an alphanumeric
/// character.
pub fn contains_word(haystack: &str, needle: &str) -> bool {
    find_word(haystack, needle).is_some()
}

pub fn find_word(haystack: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    haystack.match_indices(needle).map(|(i, _)| i).find(|&i| {
        let before = haystack[..i].chars().next_back();
        let after = haystack[i + needle.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}
