use serde::{Deserialize, Serialize};

use crate::model::{CommentId, Essay, EssayId, Rubric, RubricId, Verdict};
use crate::pipeline::FeedbackComment;
use crate::review::{apply, EffectiveState, ReviewAction};
use crate::spans::MatchQuality;

/// Placeholder for a missing historic comment.
pub const NO_HISTORIC: &str = "—";

/// A highlighted stretch of the essay. Overlapping anchors share one region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub start: usize,
    pub end: usize,
    pub comment_ids: Vec<CommentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentBlock {
    pub comment_id: CommentId,
    pub rubric_id: RubricId,
    pub rubric: String,
    pub ai_judgment: Verdict,
    pub ai_feedback: String,
    pub historic_feedback: String,
    pub match_quality: MatchQuality,
    /// `None` for blocks shown in the document-level section.
    pub anchor: Option<(usize, usize)>,
    pub quoted_text: String,
    /// Latest review disposition by any reviewer.
    pub review: Option<EffectiveState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub essay_id: EssayId,
    pub html_like_markup: String,
    pub regions: Vec<Region>,
    /// Anchored blocks in offset order, then document-level blocks.
    pub comment_blocks: Vec<CommentBlock>,
}

impl AnnotatedDocument {
    pub fn document_level(&self) -> impl Iterator<Item = &CommentBlock> {
        self.comment_blocks.iter().filter(|b| b.anchor.is_none())
    }
}

pub(crate) fn escape_into(out: &mut String, text: &str) {
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
}

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    escape_into(&mut out, text);
    out
}

/// Builds the annotated view of one essay. Comments for other essays are
/// ignored; `rubrics` supplies criterion text and ordering.
pub fn export_annotated(
    essay: &Essay,
    comments: &[&FeedbackComment],
    actions: &[ReviewAction],
    rubrics: &[Rubric],
) -> AnnotatedDocument {
    let rank = |id: &RubricId| rubrics.iter().position(|r| &r.id == id).unwrap_or(usize::MAX);
    let text = essay.text();

    let mut mine: Vec<&FeedbackComment> = comments
        .iter()
        .copied()
        .filter(|c| c.essay_id == essay.id)
        .collect();
    let anchored = |c: &FeedbackComment| {
        c.anchor.is_resolved()
            && c.anchor.start < c.anchor.end
            && c.anchor.end <= text.len()
            && text.is_char_boundary(c.anchor.start)
            && text.is_char_boundary(c.anchor.end)
    };
    mine.sort_by_key(|c| {
        let start = if anchored(c) { c.anchor.start } else { usize::MAX };
        (start, rank(&c.rubric_id), c.id.clone())
    });

    let comment_blocks = mine
        .iter()
        .map(|c| {
            let review = actions
                .iter()
                .rev()
                .find(|a| a.comment_id == c.id)
                .map(|a| apply(c, a));
            CommentBlock {
                comment_id: c.id.clone(),
                rubric_id: c.rubric_id.clone(),
                rubric: rubrics
                    .iter()
                    .find(|r| r.id == c.rubric_id)
                    .map(|r| r.criterion.clone())
                    .unwrap_or_default(),
                ai_judgment: c.judgment.verdict,
                ai_feedback: c.ai_feedback.clone(),
                historic_feedback: c
                    .historic_feedback
                    .clone()
                    .unwrap_or_else(|| NO_HISTORIC.to_string()),
                match_quality: c.anchor.match_quality,
                anchor: anchored(c).then_some((c.anchor.start, c.anchor.end)),
                quoted_text: c.anchor.quoted_text.clone(),
                review,
            }
        })
        .collect::<Vec<_>>();

    let mut regions: Vec<Region> = Vec::new();
    for block in &comment_blocks {
        let Some((start, end)) = block.anchor else {
            continue;
        };
        match regions.last_mut() {
            Some(last) if start < last.end => {
                last.end = last.end.max(end);
                last.comment_ids.push(block.comment_id.clone());
            }
            _ => regions.push(Region {
                start,
                end,
                comment_ids: vec![block.comment_id.clone()],
            }),
        }
    }

    let mut markup = String::with_capacity(text.len() + regions.len() * 48);
    let mut cursor = 0;
    for region in &regions {
        escape_into(&mut markup, &text[cursor..region.start]);
        let ids: Vec<&str> = region.comment_ids.iter().map(CommentId::as_str).collect();
        markup.push_str("<mark data-comments=\"");
        escape_into(&mut markup, &ids.join(" "));
        markup.push_str("\">");
        escape_into(&mut markup, &text[region.start..region.end]);
        markup.push_str("</mark>");
        cursor = region.end;
    }
    escape_into(&mut markup, &text[cursor..]);

    AnnotatedDocument {
        essay_id: essay.id.clone(),
        html_like_markup: markup,
        regions,
        comment_blocks,
    }
}

/// Removes highlight markers and undoes escaping, giving back the essay text.
pub fn strip_markers(markup: &str) -> String {
    let mut plain = String::with_capacity(markup.len());
    let mut rest = markup;
    while let Some(lt) = rest.find('<') {
        plain.push_str(&rest[..lt]);
        match rest[lt..].find('>') {
            Some(gt) => rest = &rest[lt + gt + 1..],
            None => {
                rest = &rest[lt..];
                break;
            }
        }
    }
    plain.push_str(rest);
    plain
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&amp;", "&")
}
