use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    /// Tokens ending in a period that never close a sentence. Compared
    /// case-insensitively.
    pub abbreviations: Vec<String>,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            abbreviations: ["e.g.", "i.e.", "vs.", "etc.", "Mr.", "Dr."]
                .map(String::from)
                .to_vec(),
        }
    }
}

const TERMINALS: [char; 3] = ['.', '!', '?'];
const CLOSERS: [char; 6] = ['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];
const OPENERS: [char; 5] = ['"', '\'', '(', '\u{201c}', '\u{2018}'];

pub fn segment(text: &str) -> Vec<Sentence> {
    segment_with(text, &SegmentConfig::default())
}

/// Rule-based segmentation. A sentence ends after a run of `.`, `!` or `?`
/// (plus any closing quotes or brackets) when what follows is the end of the
/// text, or whitespace and then an uppercase letter. Abbreviations suppress
/// the split. Whitespace between sentences belongs to no sentence.
pub fn segment_with(text: &str, config: &SegmentConfig) -> Vec<Sentence> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut i = 0;

    let push = |out: &mut Vec<Sentence>, s: usize, e: usize| {
        out.push(Sentence {
            index: out.len(),
            start: s,
            end: e,
            text: text[s..e].to_string(),
        });
    };

    while i < n {
        let (pos, c) = chars[i];
        let Some(sentence_start) = start else {
            if c.is_whitespace() {
                i += 1;
            } else {
                start = Some(pos);
            }
            continue;
        };
        if !TERMINALS.contains(&c) {
            i += 1;
            continue;
        }

        let run_start = i;
        let mut j = i;
        while j + 1 < n && TERMINALS.contains(&chars[j + 1].1) {
            j += 1;
        }
        let run_end = j;
        while j + 1 < n && CLOSERS.contains(&chars[j + 1].1) {
            j += 1;
        }
        let end_byte = chars[j].0 + chars[j].1.len_utf8();

        let mut k = j + 1;
        while k < n && chars[k].1.is_whitespace() {
            k += 1;
        }
        let mut boundary = if k >= n {
            true
        } else if k == j + 1 {
            false
        } else {
            let mut m = k;
            while m < n && OPENERS.contains(&chars[m].1) {
                m += 1;
            }
            m < n && chars[m].1.is_uppercase()
        };

        if boundary && run_start == run_end && c == '.' {
            let word_start = chars[..run_start]
                .iter()
                .rposition(|&(_, ch)| ch.is_whitespace())
                .map(|p| chars[p].0 + chars[p].1.len_utf8())
                .unwrap_or(0)
                .max(sentence_start);
            let token = &text[word_start..chars[run_end].0 + 1];
            if config
                .abbreviations
                .iter()
                .any(|a| a.eq_ignore_ascii_case(token))
            {
                boundary = false;
            }
        }

        if boundary {
            push(&mut out, sentence_start, end_byte);
            start = None;
            i = k;
        } else {
            i = j + 1;
        }
    }

    if let Some(s) = start {
        let e = s + text[s..].trim_end().len();
        if e > s {
            push(&mut out, s, e);
        }
    }
    out
}
