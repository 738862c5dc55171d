//! The library-level acceptance criteria, shared by both crates' acceptance
//! runners.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::common::*;
use marginalia_core::export::{
    export_annotated, export_records, import_records, render_page, strip_markers,
};
use marginalia_core::lint::{lint_rubric, LintDimension};
use marginalia_core::llm::{Gateway, GatewayConfig, GatewayError, ReplayProvider, ResponseSchema};
use marginalia_core::model::{Elaboration, Polarity, ReviewerId, Rubric, RunId, Verdict};
use marginalia_core::pipeline::{
    FailedComment, FeedbackComment, Pipeline, PipelineConfig, PipelineMode, RunOutput, Step,
};
use marginalia_core::review::{
    agreement, kappa, replay, ActionKind, ItemKey, ReviewAction, ReviewError, RunStatus, Store,
    VerdictMap,
};
use marginalia_core::spans::{resolve, segment, MatchQuality};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    }};
}

fn mock_run(run: &str, mode: PipelineMode) -> RunOutput {
    Pipeline::new(RunId::from(run), Gateway::mock(), PipelineConfig::with_mode(mode)).run_batch(
        &econ_assignment(),
        &econ_rubrics(),
        &econ_essays(),
    )
}

fn pipeline_structure() -> Outcome {
    let rubrics = econ_rubrics();
    for mode in [PipelineMode::FullAi, PipelineMode::JudgmentPlusHistoric] {
        let started = Instant::now();
        let out = mock_run("accept-structure", mode);
        let elapsed = started.elapsed();
        ensure!(elapsed < Duration::from_secs(5), "{mode:?} took {elapsed:?}");
        ensure!(out.failures.is_empty(), "{} failures", out.failures.len());
        ensure!(out.comments.len() == 30, "{} comments", out.comments.len());

        let expected_steps = match mode {
            PipelineMode::FullAi => 3,
            PipelineMode::JudgmentPlusHistoric => 2,
        };
        let mut cells = BTreeSet::new();
        for c in &out.comments {
            let rubric = rubrics.iter().find(|r| r.id == c.rubric_id).ok_or("unknown rubric")?;
            ensure!(c.judgment.rubric_id == c.rubric_id, "judgment rubric mismatch");
            ensure!(
                c.provenance.len() == expected_steps,
                "{} provenance entries in {mode:?}",
                c.provenance.len()
            );
            match mode {
                PipelineMode::FullAi => ensure!(!c.ai_feedback.is_empty(), "empty AI feedback"),
                PipelineMode::JudgmentPlusHistoric => {
                    ensure!(c.ai_feedback.is_empty(), "AI feedback in judgment-only mode")
                }
            }
            let has_entries = !rubric.historic_feedback.is_empty();
            let want = c.judgment.verdict == Verdict::Missed && has_entries;
            ensure!(
                c.historic_feedback.is_some() == want,
                "historic feedback rule broken for {}/{}",
                c.essay_id,
                c.rubric_id
            );
            if let Some(h) = &c.historic_feedback {
                ensure!(h == &rubric.historic_feedback[0], "historic is not the first entry");
            }
            cells.insert((c.judgment.verdict, has_entries));
        }
        ensure!(cells.len() == 4, "grid cells covered: {cells:?}");
    }
    Ok(())
}

/// Replaces run and comment ids with positional placeholders.
fn normalized_records(out: &RunOutput) -> String {
    let refs: Vec<&FeedbackComment> = out.comments.iter().collect();
    export_records(&refs, &out.failures)
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            v["run_id"] = "RUN".into();
            if v.get("comment_id").is_some() {
                v["comment_id"] = format!("C{i}").into();
            }
            v.to_string() + "\n"
        })
        .collect()
}

fn normalized_pages(out: &RunOutput) -> String {
    let mut all = String::new();
    for essay in econ_essays() {
        let refs: Vec<&FeedbackComment> = out.comments.iter().collect();
        let mut page = render_page(&export_annotated(&essay, &refs, &[], &econ_rubrics()), "x");
        for (i, c) in out.comments.iter().enumerate() {
            page = page.replace(c.id.as_str(), &format!("C{i}"));
        }
        all.push_str(&page);
    }
    all
}

fn determinism() -> Outcome {
    for mode in [PipelineMode::FullAi, PipelineMode::JudgmentPlusHistoric] {
        let a = mock_run("accept-run-a", mode);
        let b = mock_run("accept-run-b", mode);
        ensure!(normalized_records(&a) == normalized_records(&b), "record exports differ");
        ensure!(normalized_pages(&a) == normalized_pages(&b), "annotated pages differ");
        let again = mock_run("accept-run-a", mode);
        ensure!(again.comments == a.comments, "same run id gives different comments");
    }
    Ok(())
}

fn mutate(rng: &mut ChaCha8Rng, quote: &str) -> String {
    let mut q = quote.to_uppercase();
    if rng.random_bool(0.5) {
        let runs = ["  ", "\t", "\n ", "   "];
        q = q
            .split(' ')
            .map(str::to_string)
            .reduce(|a, b| format!("{a}{}{b}", runs.choose(rng).unwrap()))
            .unwrap_or_default();
    }
    if rng.random_bool(0.5) {
        q = q.trim_end_matches(['.', '!', '?']).to_string();
    }
    if rng.random_bool(0.3) {
        q = format!("\u{201c}{q}\u{201d}");
    }
    q
}

fn anchoring() -> Outcome {
    let mut r = rng(2024);
    let (mut exact, mut normalized, mut fuzzy) = (0, 0, 0);
    for id in 0..1000 {
        let g = random_essay(&mut r, id);
        let text = g.essay.text();
        let n = g.bounds.len();
        for i in 0..n {
            for j in i..n {
                let (start, end) = (g.bounds[i].0, g.bounds[j].1);
                let quote = &text[start..end];
                let span = resolve(&"R".into(), quote, &g.essay);
                ensure!(
                    span.match_quality == MatchQuality::Exact && (span.start, span.end) == (start, end),
                    "exact failed for {quote:?}: {span:?}"
                );
                exact += 1;

                let mutated = mutate(&mut r, quote);
                let span = resolve(&"R".into(), &mutated, &g.essay);
                ensure!(
                    span.match_quality == MatchQuality::Normalized
                        && (span.start, span.end) == (start, end),
                    "normalized failed for {mutated:?}: {span:?}"
                );
                normalized += 1;
            }
        }
        for (k, words) in g.words.iter().enumerate() {
            if words.len() < 5 {
                continue;
            }
            let max_drop = (words.len() * 2) / 5;
            let drops = r.random_range(1..=max_drop.max(1));
            let mut kept = words.clone();
            for _ in 0..drops {
                let at = r.random_range(1..kept.len() - 1);
                kept.remove(at);
            }
            let quote = kept.join(" ");
            let (start, end) = g.bounds[k];
            let expected = oracle_jaccard(&quote, &text[start..end]);
            // a vocabulary word can be a prefix of another, leaving the quote verbatim
            if expected < 0.6 || text.contains(&quote) {
                continue;
            }
            let span = resolve(&"R".into(), &quote, &g.essay);
            match span.match_quality {
                MatchQuality::Fuzzy { score } => {
                    ensure!((score - expected).abs() < 1e-9, "score {score} vs oracle {expected}")
                }
                other => return Err(format!("dropout {quote:?} resolved {other:?}")),
            }
            ensure!((span.start, span.end) == (start, end), "dropout anchored elsewhere");
            fuzzy += 1;
        }
    }
    ensure!(fuzzy > 1000, "only {fuzzy} dropout cases");
    println!("      ({exact} exact, {normalized} normalized, {fuzzy} fuzzy cases)");
    Ok(())
}

fn segmentation() -> Outcome {
    let fixture: Vec<(usize, usize)> =
        segment("Price rises. Demand falls.").iter().map(|s| (s.start, s.end)).collect();
    ensure!(fixture == [(0, 12), (13, 26)], "fixture offsets {fixture:?}");
    let mut r = rng(99);
    for id in 0..1000 {
        let g = random_essay(&mut r, id);
        let text = g.essay.text();
        let sentences = segment(text);
        let mut prev_end = 0;
        for (i, s) in sentences.iter().enumerate() {
            ensure!(s.index == i, "indexes not contiguous");
            ensure!(s.start >= prev_end && s.start < s.end, "overlap or empty sentence");
            ensure!(text[s.start..s.end] == *s.text, "sentence text is not the source slice");
            prev_end = s.end;
        }
        let got: Vec<(usize, usize)> = sentences.iter().map(|s| (s.start, s.end)).collect();
        ensure!(got == g.bounds, "boundaries {got:?} vs built {:?}", g.bounds);
    }
    Ok(())
}

fn verdicts(v: &[bool]) -> VerdictMap {
    v.iter()
        .enumerate()
        .map(|(i, met)| {
            let verdict = if *met { Verdict::Met } else { Verdict::Missed };
            (ItemKey::new(format!("E{i}"), format!("R{}", i % 3)), verdict)
        })
        .collect()
}

fn agreement_math() -> Outcome {
    let a = verdicts(&[true, true, false, false]);
    let b = verdicts(&[true, false, false, false]);
    let report = agreement(&a, &b).map_err(|e| e.to_string())?;
    ensure!(report.kappa == 0.5, "fixture kappa {}", report.kappa);

    let mut r = rng(5);
    for _ in 0..2000 {
        let n = r.random_range(1..60);
        let va: Vec<bool> = (0..n).map(|_| r.random_bool(0.6)).collect();
        let vb: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
        let report = agreement(&verdicts(&va), &verdicts(&vb)).map_err(|e| e.to_string())?;
        let (po, pa, pb) = oracle_agreement(&va, &vb);
        let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
        ensure!((report.observed_agreement - po).abs() < 1e-12, "p_o mismatch");
        ensure!((report.expected_agreement - pe).abs() < 1e-12, "p_e mismatch");
        if pe < 1.0 {
            let k = (po - pe) / (1.0 - pe);
            ensure!((report.kappa - k).abs() < 1e-9, "kappa {} vs {k}", report.kappa);
        }
    }

    let all_met = verdicts(&[true, true, true]);
    let r1 = agreement(&all_met, &all_met).map_err(|e| e.to_string())?;
    ensure!(r1.kappa == 1.0, "degenerate perfect agreement gave {}", r1.kappa);
    ensure!(kappa(0.0, 1.0) == 0.0, "degenerate disagreement rule");
    Ok(())
}

fn paper_fixture() -> Outcome {
    let (assignment, rubrics, essay) = externality_fixture();
    let provider = ReplayProvider::from_file(fixture_path("externality_transcript.jsonl"))
        .map_err(|e| e.to_string())?;
    let gateway = Gateway::new(Arc::new(provider), &GatewayConfig::default());
    let out = Pipeline::new("paper".into(), gateway, PipelineConfig::default()).run_batch(
        &assignment,
        &rubrics,
        std::slice::from_ref(&essay),
    );
    let c = out.comments.first().ok_or("no comment produced")?;
    ensure!(rubrics[0].criterion == EXTERNALITY_RUBRIC, "rubric text");
    ensure!(c.judgment.verdict == Verdict::Missed, "verdict {:?}", c.judgment.verdict);
    ensure!(c.ai_feedback == EXTERNALITY_AI_FEEDBACK, "AI feedback text");
    ensure!(c.historic_feedback.as_deref() == Some(EXTERNALITY_HISTORIC), "historic text");
    ensure!(c.anchor.quoted_text == EXTERNALITY_SENTENCE, "quoted evidence");
    ensure!(
        &essay.text()[c.anchor.start..c.anchor.end] == EXTERNALITY_SENTENCE,
        "anchor offsets"
    );

    let provider =
        ReplayProvider::from_file(fixture_path("externality_paraphrase_transcript.jsonl"))
            .map_err(|e| e.to_string())?;
    let gateway = Gateway::new(Arc::new(provider), &GatewayConfig::default());
    let out = Pipeline::new("paper-para".into(), gateway, PipelineConfig::default()).run_batch(
        &assignment,
        &rubrics,
        std::slice::from_ref(&essay),
    );
    let c = out.comments.first().ok_or("no paraphrase comment")?;
    match c.anchor.match_quality {
        MatchQuality::Fuzzy { score } if score >= 0.6 => Ok(()),
        other => Err(format!("paraphrase resolved {other:?}")),
    }
}

fn seeded_store(store: &mut Store) -> Vec<FeedbackComment> {
    for r in econ_rubrics() {
        store.put_rubric(r).unwrap();
    }
    store.put_assignment(econ_assignment()).unwrap();
    for e in econ_essays() {
        store.put_essay(e).unwrap();
    }
    let ids = econ_essays().into_iter().map(|e| e.id).collect();
    store.queue_run("es-run".into(), "A1".into(), ids, "mock").unwrap();
    let out = mock_run("es-run", PipelineMode::FullAi);
    let comments = out.comments.clone();
    store.finish_run(out).unwrap();
    comments
}

fn event_sourcing() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("events.jsonl");
    let mut store = Store::open(&path).map_err(|e| e.to_string())?;
    let comments = seeded_store(&mut store);
    let mut r = rng(17);
    for _ in 0..500 {
        let c = comments.choose(&mut r).unwrap();
        let who = ReviewerId::from(format!("ta-{}", r.random_range(0..3)));
        let action = match r.random_range(0..5) {
            0 => ReviewAction::new(c.id.clone(), who, ActionKind::AcceptAi),
            1 => ReviewAction::new(c.id.clone(), who, ActionKind::AcceptHistoric),
            2 => ReviewAction::new(c.id.clone(), who, ActionKind::Edit)
                .with_text(format!("text {}", r.random_range(0..4))),
            3 => ReviewAction::new(c.id.clone(), who, ActionKind::FlipJudgment)
                .with_verdict(c.judgment.verdict.flipped()),
            _ => ReviewAction::new(c.id.clone(), who, ActionKind::Dismiss),
        };
        let _ = store.record_action(action);
    }
    let live = store.effective_map().clone();
    let folded = replay(comments.iter(), store.actions());
    ensure!(folded == live, "fold over the action log differs from live state");
    drop(store);
    let reopened = Store::open(&path).map_err(|e| e.to_string())?;
    ensure!(reopened.effective_map() == &live, "reopened store differs");

    let mut store = reopened;
    let c = &comments[0];
    let same = ReviewAction::new(c.id.clone(), "ta-x".into(), ActionKind::FlipJudgment)
        .with_verdict(c.judgment.verdict);
    ensure!(
        matches!(store.record_action(same), Err(ReviewError::InvalidAction(_))),
        "flip without change accepted"
    );
    let blank = ReviewAction::new(c.id.clone(), "ta-x".into(), ActionKind::Edit);
    ensure!(
        matches!(store.record_action(blank), Err(ReviewError::InvalidAction(_))),
        "edit without text accepted"
    );
    Ok(())
}

fn exporter() -> Outcome {
    // marker stripping over every essay with every comment, plus stacked anchors
    let out = mock_run("export", PipelineMode::FullAi);
    let mut r = rng(31);
    for essay in econ_essays().into_iter().chain([externality_fixture().2]) {
        let mut comments: Vec<FeedbackComment> = out.comments.clone();
        for c in comments.iter_mut() {
            c.essay_id = essay.id.clone();
            let sentences = essay.sentences();
            let a = r.random_range(0..sentences.len());
            let b = r.random_range(a..sentences.len());
            c.anchor.start = sentences[a].start;
            c.anchor.end = sentences[b].end;
            c.anchor.match_quality = MatchQuality::Exact;
        }
        let refs: Vec<&FeedbackComment> = comments.iter().collect();
        let doc = export_annotated(&essay, &refs, &[], &econ_rubrics());
        ensure!(strip_markers(&doc.html_like_markup) == essay.text(), "strip mismatch on {}", essay.id);
        let ids: usize = doc.regions.iter().map(|g| g.comment_ids.len()).sum();
        ensure!(ids == doc.comment_blocks.len(), "region ids do not cover the blocks");
        let markers = doc.html_like_markup.matches("<mark ").count();
        ensure!(markers == doc.regions.len(), "marker count {markers}");
    }

    // lossless record round trip including a failure
    let failure = FailedComment {
        run_id: "export".into(),
        essay_id: "E1".into(),
        rubric_id: "R9".into(),
        step: Step::Feedback,
        error: GatewayError::SchemaViolation {
            schema: ResponseSchema::FeedbackMessage,
            raw_attempts: vec!["a".into(), "b".into(), "c".into()],
            last_error: "no JSON object found".into(),
        },
    };
    let refs: Vec<&FeedbackComment> = out.comments.iter().collect();
    let text = export_records(&refs, std::slice::from_ref(&failure));
    let (back, failures) = import_records(&text).map_err(|e| e.to_string())?;
    ensure!(back == out.comments && failures == [failure.clone()], "import lost data");
    let back_refs: Vec<&FeedbackComment> = back.iter().collect();
    ensure!(export_records(&back_refs, &failures) == text, "re-export not byte-identical");

    for (name, content) in golden_outputs() {
        let expected = std::fs::read_to_string(golden_path(name)).map_err(|e| e.to_string())?;
        ensure!(expected.replace("\r\n", "\n") == content, "golden {name} drifted");
    }
    Ok(())
}

fn elaborated(criterion: &str, polarity: Polarity) -> Rubric {
    Rubric::new("T1", "t", criterion).with_elaboration(Elaboration {
        domain_definition: Some("Definition of the concept in the course's own terms.".into()),
        acceptable_alternatives: vec!["An equivalent argument using a worked example.".into()],
        expected_depth: Some("One or two sentences with a causal explanation.".into()),
        polarity,
    })
}

fn dims(r: &Rubric) -> Vec<LintDimension> {
    lint_rubric(r).into_iter().map(|w| w.dimension).collect()
}

fn rubric_linter() -> Outcome {
    let bad_depth = Rubric::new("B1", "depth", "Explain the concept of artificially scarce goods conceptually.");
    ensure!(dims(&bad_depth).contains(&LintDimension::UnspecifiedDepth), "bad depth example not flagged");

    let bad_negative = Rubric::new("B2", "quotes", "Direct in-text references are present.")
        .with_elaboration(Elaboration {
            polarity: Polarity::ProhibitedBehavior,
            ..Elaboration::default()
        });
    ensure!(
        dims(&bad_negative).contains(&LintDimension::ImplicitNegativeBehavior),
        "bad negative-behavior example not flagged"
    );

    let good_depth = "The student explained why deadweight loss exists and mention it is quite large given that the Government purchased the excess.";
    let good_negative = "The student did not use long direct quotes (more than 1 sentence in one quote) from the article.";
    let g1 = elaborated(good_depth, Polarity::ExpectedBehavior);
    let g2 = elaborated(good_negative, Polarity::ProhibitedBehavior);
    ensure!(dims(&g1).is_empty(), "good depth example warned: {:?}", dims(&g1));
    ensure!(dims(&g2).is_empty(), "good negative example warned: {:?}", dims(&g2));

    // their own dimension stays quiet even without any elaboration
    let bare = Rubric::new("G1", "d", good_depth);
    ensure!(!dims(&bare).contains(&LintDimension::UnspecifiedDepth), "bare good depth flagged");
    let bare = Rubric::new("G2", "n", good_negative).with_elaboration(Elaboration {
        polarity: Polarity::ProhibitedBehavior,
        ..Elaboration::default()
    });
    ensure!(
        !dims(&bare).contains(&LintDimension::ImplicitNegativeBehavior),
        "bare good negative flagged"
    );
    Ok(())
}

fn store_run_lifecycle() -> Outcome {
    let mut store = Store::in_memory();
    seeded_store(&mut store);
    let status = store.run(&"es-run".into()).map(|r| r.status);
    ensure!(status == Some(RunStatus::Complete), "status {status:?}");
    Ok(())
}

pub type Criterion = (&'static str, fn() -> Outcome);

pub const CRITERIA: &[Criterion] = &[
    ("pipeline structure (5 essays x 6 rubrics, both modes, grid, < 5 s)", pipeline_structure),
    ("determinism (normalized exports of two mock runs identical)", determinism),
    ("anchoring (1000 random essays: exact, normalized, fuzzy vs oracle)", anchoring),
    ("segmentation (invariants on random corpus, two-sentence fixture)", segmentation),
    ("agreement math (fixture kappa 0.5, random recount oracle, degenerate rule)", agreement_math),
    ("externality transcript replay reproduces the quoted texts", paper_fixture),
    ("event sourcing (replay reproduces state, invalid actions rejected)", event_sourcing),
    ("exporter (marker stripping, lossless records, golden files)", exporter),
    ("rubric linter (bad examples flagged, good examples clean)", rubric_linter),
    ("run lifecycle recorded in the store", store_run_lifecycle),
];

/// Runs one check, printing its PASS/FAIL line. Panics count as failures.
pub fn run_check(name: &str, check: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    match result {
        Ok(()) => {
            println!("PASS  {name}  [{} ms]", started.elapsed().as_millis());
            true
        }
        Err(why) => {
            println!("FAIL  {name}: {why}");
            false
        }
    }
}
