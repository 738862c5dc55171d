//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use chrono::{TimeZone, Utc};
use marginalia_core::export::{export_annotated, export_records, render_page, AnnotatedDocument};
use marginalia_core::llm::Gateway;
use marginalia_core::model::{Assignment, Essay, ExampleFeedback, Rubric, RunId, Verdict};
use marginalia_core::pipeline::{FeedbackComment, Pipeline, PipelineConfig};
use marginalia_core::review::{ActionKind, ReviewAction};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// "../core" keeps these valid when the module is compiled into the service
// crate's acceptance run
pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/golden")
        .join(name)
}

// ---------------------------------------------------------------------------
// 5 essays x 6 rubrics on a fisheries assignment

pub fn econ_rubrics() -> Vec<Rubric> {
    vec![
        Rubric::new("R1", "rivalry", "Explain that bluefin tuna is a rival good.")
            .with_keywords(&[&["rival", "rivalrous"], &["consume", "consumed", "consumption"]])
            .with_historic("Think about what happens to the supply when one boat lands a tuna."),
        Rubric::new("R2", "excludability", "Explain why ocean fish are hard to exclude people from.")
            .with_keywords(&[&["exclude", "excludable", "non-excludable"]])
            .with_historic("Who can stop a fishing boat from entering open water?"),
        Rubric::new("R3", "commons", "Identify the outcome as a tragedy of the commons.")
            .with_keywords(&[&["tragedy of the commons", "overfishing"]])
            .with_historic("Name the classic outcome when a shared resource is overused.")
            .with_historic("A second historic entry that is never picked first."),
        Rubric::new("R4", "quota", "Describe how a catch quota limits the harvest.")
            .with_keywords(&[&["quota", "quotas"], &["limit", "limits", "cap"]]),
        Rubric::new("R5", "price", "Connect scarcity to a higher market price.")
            .with_keywords(&[&["price", "prices"], &["scarce", "scarcity"]]),
        Rubric::new("R6", "enforcement", "Explain why enforcement is costly at sea.")
            .with_keywords(&[&["enforcement", "enforce"], &["costly", "expensive"]]),
    ]
}

pub fn econ_assignment() -> Assignment {
    Assignment {
        id: "A1".into(),
        title: "Bluefin tuna".into(),
        prompt_text: "Analyze the market for bluefin tuna.".into(),
        rubric_ids: econ_rubrics().into_iter().map(|r| r.id).collect(),
        few_shot_examples: vec![ExampleFeedback {
            situation: "student omitted the role of price".into(),
            feedback_text: "Nice start on supply! How would buyers react when fewer fish are landed?"
                .into(),
        }],
    }
}

pub fn econ_essays() -> Vec<Essay> {
    let texts = [
        // every rubric met
        "Bluefin tuna is rival because a fish one boat has consumed cannot be caught by another. \
         It is hard to exclude anyone from the open ocean. The result is a tragedy of the commons. \
         A quota limits the total catch each season. As tuna gets scarce, the price climbs. \
         Enforcement is costly because patrol ships are expensive to run.",
        // R1, R3, R5 met
        "Tuna is rival in consumption. Overfishing follows when nobody owns the stock. \
         Scarcity pushes the price up for sushi restaurants.",
        // R2, R4, R6 met
        "No one can exclude boats from international waters. A quota can cap the harvest. \
         Enforcement at sea is expensive.",
        // R1 partially (rival only), R4 met, R5 partially
        "The fish are rival goods. Governments set a quota to limit what is caught. \
         Prices change every year.",
        // nothing met
        "I like fish. My family eats dinner together on Fridays.",
    ];
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| Essay::new(format!("E{}", i + 1), "A1", &format!("student-{}", i + 1), *t))
        .collect()
}

// ---------------------------------------------------------------------------
// Randomized essays with known sentence boundaries

pub struct GeneratedEssay {
    pub essay: Essay,
    /// (start, end) of each sentence as built.
    pub bounds: Vec<(usize, usize)>,
    /// Words of each sentence, starter first, terminal punctuation excluded.
    pub words: Vec<Vec<String>>,
}

const STARTERS: &[&str] = &[
    "Alpha", "Bravo", "Charlie", "Delta", "Echo", "Foxtrot", "Golf", "Hotel", "India", "Juliet",
    "Kilo", "Lima", "Mike", "November", "Oscar", "Papa", "Quebec", "Romeo", "Sierra", "Tango",
    "Uniform", "Victor", "Whiskey", "Xray", "Yankee", "Zulu", "Émile", "Ödön", "Ísold", "Łukasz",
];

fn body_vocab() -> Vec<String> {
    let onsets = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
    let nuclei = ["a", "e", "i", "o", "u", "é", "ü", "ai"];
    let codas = ["", "n", "r", "st", "k"];
    let mut words = Vec::new();
    for o in onsets {
        for n in nuclei {
            for c in codas {
                words.push(format!("{o}{n}{c}"));
            }
        }
    }
    words.extend(["café", "naïve", "日本", "x2", "42"].map(String::from));
    words
}

pub fn random_essay(rng: &mut ChaCha8Rng, id: usize) -> GeneratedEssay {
    let vocab = body_vocab();
    let n_sentences = rng.random_range(1..=10);
    let mut starters: Vec<&str> = STARTERS.to_vec();
    starters.shuffle(rng);

    let mut text = String::new();
    let mut bounds = Vec::new();
    let mut words = Vec::new();
    for (s, starter) in starters.iter().enumerate().take(n_sentences) {
        if s > 0 {
            text.push_str(["  ", " ", "\n", "\n\n", " \t"].choose(rng).unwrap());
        }
        let n_words = rng.random_range(3..=12);
        let mut ws: Vec<String> = vec![starter.to_string()];
        ws.extend(vocab.choose_multiple(rng, n_words).cloned());
        let start = text.len();
        text.push_str(&ws.join(" "));
        text.push_str([".", ".", "!", "?", "?!", "..."].choose(rng).unwrap());
        bounds.push((start, text.len()));
        words.push(ws);
    }
    GeneratedEssay {
        essay: Essay::new(format!("G{id}"), "A1", "gen", &text),
        bounds,
        words,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Oracles

/// Lowercased maximal alphanumeric runs, deduplicated.
pub fn oracle_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens.sort();
    tokens.dedup();
    tokens
}

pub fn oracle_jaccard(a: &str, b: &str) -> f64 {
    let (ta, tb) = (oracle_tokens(a), oracle_tokens(b));
    let inter = ta.iter().filter(|t| tb.contains(t)).count();
    let union = ta.len() + tb.len() - inter;
    inter as f64 / union as f64
}

/// Brute-force (p_o, share of `true` in a, share of `true` in b).
pub fn oracle_agreement(a: &[bool], b: &[bool]) -> (f64, f64, f64) {
    let n = a.len() as f64;
    let mut same = 0.0;
    let mut ta = 0.0;
    let mut tb = 0.0;
    for i in 0..a.len() {
        if a[i] == b[i] {
            same += 1.0;
        }
        if a[i] {
            ta += 1.0;
        }
        if b[i] {
            tb += 1.0;
        }
    }
    (same / n, ta / n, tb / n)
}

// ---------------------------------------------------------------------------
// The externality example from the study, replayed from a transcript

pub const EXTERNALITY_RUBRIC: &str =
    "Explain that the thrid party in the negative externality is involuntarily affected.";
pub const EXTERNALITY_SENTENCE: &str = "In economics, we call this a negative externality; the social costs are not taken on by the producers or consumers but by society.";
pub const EXTERNALITY_AI_FEEDBACK: &str = "How might the impact on individuals differ if they were voluntary participants in the market? Consider how the concept of choice plays into the definition of negative externalities.";
pub const EXTERNALITY_HISTORIC: &str = "Revisit the definition of an externality and consider how those affected are economically reflected in the market.";

pub fn externality_fixture() -> (Assignment, Vec<Rubric>, Essay) {
    let rubric = Rubric::new("EXT1", "third party", EXTERNALITY_RUBRIC)
        .with_historic(EXTERNALITY_HISTORIC);
    let assignment = Assignment {
        id: "A-ext".into(),
        title: "Externalities".into(),
        prompt_text: "Discuss a negative externality of a market you know.".into(),
        rubric_ids: vec![rubric.id.clone()],
        few_shot_examples: vec![],
    };
    let text = format!(
        "Factories near the river release waste while making paper. {EXTERNALITY_SENTENCE} \
         People downstream pay for cleaner water."
    );
    let essay = Essay::new("E-ext", "A-ext", "student-ext", &text);
    (assignment, vec![rubric], essay)
}

// ---------------------------------------------------------------------------
// Golden exports: mock run over essays E2..E4 with two fixed review actions

pub fn golden_run() -> Vec<FeedbackComment> {
    let essays = econ_essays();
    Pipeline::new(RunId::from("golden-run"), Gateway::mock(), PipelineConfig::default())
        .run_batch(&econ_assignment(), &econ_rubrics(), &essays[1..4])
        .comments
}

fn fixed_action(n: u32, comment: &FeedbackComment, kind: ActionKind) -> ReviewAction {
    let mut a = ReviewAction::new(comment.id.clone(), "ta-1".into(), kind);
    a.id = format!("action-{n}");
    a.created_at = Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, n).unwrap();
    a
}

pub fn golden_document() -> AnnotatedDocument {
    let essays = econ_essays();
    let essay = &essays[1];
    let comments = golden_run();
    let refs: Vec<&FeedbackComment> = comments.iter().filter(|c| c.essay_id == essay.id).collect();
    let missed = refs.iter().find(|c| c.judgment.verdict == Verdict::Missed).unwrap();
    let met = refs.iter().find(|c| c.judgment.verdict == Verdict::Met).unwrap();
    let actions = vec![
        fixed_action(1, met, ActionKind::AcceptAi),
        fixed_action(2, missed, ActionKind::Edit).with_text("Who could stop a boat from fishing here?"),
    ];
    export_annotated(essay, &refs, &actions, &econ_rubrics())
}

/// (file name, freshly rendered content) for every golden file.
pub fn golden_outputs() -> Vec<(&'static str, String)> {
    let doc = golden_document();
    let comments = golden_run();
    let refs: Vec<&FeedbackComment> = comments.iter().collect();
    vec![
        ("annotated_E2.json", serde_json::to_string_pretty(&doc).unwrap() + "\n"),
        ("annotated_E2.html", render_page(&doc, "Bluefin tuna: student-2")),
        ("records_golden-run.jsonl", export_records(&refs, &[])),
    ]
}
