use std::fmt::Write;

use super::annotated::{escape, AnnotatedDocument, CommentBlock};
use crate::spans::MatchQuality;

const STYLE: &str = "\
body{font-family:Georgia,serif;margin:0;display:flex;gap:2rem;padding:2rem;background:#fafafa;color:#222}
main{flex:3;line-height:1.7;white-space:pre-wrap;background:#fff;padding:1.5rem;border:1px solid #ddd}
aside{flex:2;font-family:Helvetica,Arial,sans-serif;font-size:.9rem}
mark{background:#fff3b0;border-bottom:2px solid #e0b000}
mark.q-normalized{background:#e3f1ff;border-color:#3a8ee6}
mark.q-fuzzy{background:#fde2e2;border-color:#d9534f}
.card{background:#fff;border:1px solid #ccc;border-left:4px solid #888;padding:.6rem .8rem;margin-bottom:.8rem}
.card.met{border-left-color:#3c9d5d}
.card.missed{border-left-color:#c0392b}
.card dt{font-weight:bold;margin-top:.3rem}
.card dd{margin:0 0 .2rem 0}
.badge{display:inline-block;font-size:.75rem;padding:0 .4rem;border-radius:.6rem;background:#eee;margin-left:.4rem}
h2{font-size:1rem;margin:1.2rem 0 .5rem}
";

fn quality_class(q: &MatchQuality) -> &'static str {
    match q {
        MatchQuality::Exact => "q-exact",
        MatchQuality::Normalized => "q-normalized",
        MatchQuality::Fuzzy { .. } => "q-fuzzy",
        MatchQuality::Unresolved => "q-unresolved",
    }
}

fn badge(q: &MatchQuality) -> String {
    match q {
        MatchQuality::Fuzzy { score } => format!("fuzzy {score:.2}"),
        other => other.label().to_string(),
    }
}

fn card(out: &mut String, b: &CommentBlock) {
    let verdict = b.ai_judgment.as_str();
    let _ = writeln!(
        out,
        "<section class=\"card {verdict}\" id=\"c-{id}\">\n<dl>",
        id = escape(b.comment_id.as_str())
    );
    let _ = writeln!(
        out,
        "<dt>Rubric<span class=\"badge\">{}</span></dt><dd>{}</dd>",
        escape(&badge(&b.match_quality)),
        escape(&b.rubric)
    );
    let _ = writeln!(out, "<dt>AI judgment</dt><dd>{verdict}</dd>");
    let _ = writeln!(out, "<dt>AI feedback</dt><dd>{}</dd>", escape(&b.ai_feedback));
    let _ = writeln!(out, "<dt>Historic feedback</dt><dd>{}</dd>", escape(&b.historic_feedback));
    let review = match &b.review {
        None => "not reviewed".to_string(),
        Some(s) => {
            let mut line = format!("{} by {}", s.action.as_str(), s.reviewer_id);
            if let Some(v) = s.verdict {
                let _ = write!(line, ", verdict {v}");
            }
            if let Some(t) = &s.text {
                let _ = write!(line, ": {t}");
            }
            line
        }
    };
    let _ = write!(out, "<dt>Review</dt><dd>{}</dd>\n</dl>\n</section>\n", escape(&review));
}

/// A single self-contained HTML page: essay with highlights beside the
/// comment cards.
pub fn render_page(doc: &AnnotatedDocument, title: &str) -> String {
    let mut markup = doc.html_like_markup.clone();
    // colour each region by the match quality of its first comment
    for region in &doc.regions {
        let Some(first) = doc
            .comment_blocks
            .iter()
            .find(|b| Some(&b.comment_id) == region.comment_ids.first())
        else {
            continue;
        };
        let ids: Vec<&str> = region.comment_ids.iter().map(|c| c.as_str()).collect();
        let tag = format!("<mark data-comments=\"{}\">", escape(&ids.join(" ")));
        let classed = format!(
            "<mark class=\"{}\" data-comments=\"{}\">",
            quality_class(&first.match_quality),
            escape(&ids.join(" "))
        );
        markup = markup.replacen(&tag, &classed, 1);
    }

    let mut out = String::new();
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>\n{STYLE}</style>\n</head>\n<body>\n",
        escape(title)
    );
    let _ = write!(
        out,
        "<main data-essay=\"{}\">{markup}</main>\n<aside>\n",
        escape(doc.essay_id.as_str())
    );
    for b in doc.comment_blocks.iter().filter(|b| b.anchor.is_some()) {
        card(&mut out, b);
    }
    let general: Vec<&CommentBlock> = doc.document_level().collect();
    if !general.is_empty() {
        out.push_str("<h2>Whole-essay comments</h2>\n");
        for b in general {
            card(&mut out, b);
        }
    }
    out.push_str("</aside>\n</body>\n</html>\n");
    out
}
