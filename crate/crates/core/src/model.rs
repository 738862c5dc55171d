//! Shared domain types: assignments, rubrics, essays and instructor examples.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::spans::Sentence;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(AssignmentId);
id_type!(RubricId);
id_type!(EssayId);
id_type!(
    /// Identifier of one generated comment. Derived deterministically from
    /// the run id, essay id and rubric id.
    CommentId
);
id_type!(RunId);
id_type!(ReviewerId);

/// Binary rubric verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Met,
    Missed,
}

impl Verdict {
    pub fn flipped(self) -> Self {
        match self {
            Verdict::Met => Verdict::Missed,
            Verdict::Missed => Verdict::Met,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Met => "met",
            Verdict::Missed => "missed",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether a rubric describes something the student should do, or something
/// the student must not do.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    #[default]
    ExpectedBehavior,
    ProhibitedBehavior,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Elaboration {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_definition: Option<String>,
    #[serde(default)]
    pub acceptable_alternatives: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_depth: Option<String>,
    #[serde(default)]
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub id: RubricId,
    pub short_name: String,
    pub criterion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elaboration: Option<Elaboration>,
    /// Instructor-written messages for students who miss this rubric.
    #[serde(default)]
    pub historic_feedback: Vec<String>,
    /// Synonym groups consumed by the rule-based mock provider and the linter.
    #[serde(default)]
    pub keyword_groups: Vec<Vec<String>>,
}

impl Rubric {
    pub fn new(id: impl Into<RubricId>, short_name: &str, criterion: &str) -> Self {
        Self {
            id: id.into(),
            short_name: short_name.to_string(),
            criterion: criterion.to_string(),
            elaboration: None,
            historic_feedback: Vec::new(),
            keyword_groups: Vec::new(),
        }
    }

    pub fn with_historic(mut self, text: &str) -> Self {
        self.historic_feedback.push(text.to_string());
        self
    }

    pub fn with_keywords(mut self, groups: &[&[&str]]) -> Self {
        self.keyword_groups = groups
            .iter()
            .map(|g| g.iter().map(|s| s.to_string()).collect())
            .collect();
        self
    }

    pub fn with_elaboration(mut self, elaboration: Elaboration) -> Self {
        self.elaboration = Some(elaboration);
        self
    }

    pub fn polarity(&self) -> Polarity {
        self.elaboration
            .as_ref()
            .map(|e| e.polarity)
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleFeedback {
    pub situation: String,
    pub feedback_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: AssignmentId,
    pub title: String,
    pub prompt_text: String,
    pub rubric_ids: Vec<RubricId>,
    #[serde(default)]
    pub few_shot_examples: Vec<ExampleFeedback>,
}

/// A student essay. The text is fixed at construction; sentences are derived
/// from it by [`crate::spans::segment`] and never serialized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "EssayFields", into = "EssayFields")]
pub struct Essay {
    pub id: EssayId,
    pub assignment_id: AssignmentId,
    pub author_alias: String,
    text: String,
    sentences: Vec<Sentence>,
}

#[derive(Serialize, Deserialize)]
struct EssayFields {
    id: EssayId,
    assignment_id: AssignmentId,
    author_alias: String,
    text: String,
}

impl From<EssayFields> for Essay {
    fn from(f: EssayFields) -> Self {
        Essay::new(f.id, f.assignment_id, &f.author_alias, f.text)
    }
}

impl From<Essay> for EssayFields {
    fn from(e: Essay) -> Self {
        EssayFields {
            id: e.id,
            assignment_id: e.assignment_id,
            author_alias: e.author_alias,
            text: e.text,
        }
    }
}

impl Essay {
    /// Builds an essay and segments its text.
    pub fn new(
        id: impl Into<EssayId>,
        assignment_id: impl Into<AssignmentId>,
        author_alias: &str,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        let sentences = crate::spans::segment(&text);
        Self {
            id: id.into(),
            assignment_id: assignment_id.into(),
            author_alias: author_alias.to_string(),
            text,
            sentences,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }
}

/// One violated invariant found by [`validate_assignment`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks an assignment against the rubrics it references. An empty result
/// means the pair is safe to hand to the pipeline.
pub fn validate_assignment(assignment: &Assignment, rubrics: &[Rubric]) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    if assignment.rubric_ids.is_empty() {
        errors.push(ValidationError::new("rubric_ids", "rubric_ids empty"));
    }

    let by_id: HashMap<&RubricId, &Rubric> = rubrics.iter().map(|r| (&r.id, r)).collect();
    let mut seen = HashSet::new();
    for id in &assignment.rubric_ids {
        if !seen.insert(id) {
            errors.push(ValidationError::new("rubric_ids", format!("duplicate {id}")));
            continue;
        }
        match by_id.get(id) {
            None => errors.push(ValidationError::new(
                "rubric_ids",
                format!("unknown rubric {id}"),
            )),
            Some(rubric) => errors.extend(validate_rubric(rubric)),
        }
    }

    for (i, example) in assignment.few_shot_examples.iter().enumerate() {
        if example.situation.trim().is_empty() {
            errors.push(ValidationError::new(
                format!("few_shot_examples[{i}].situation"),
                "empty",
            ));
        }
        if example.feedback_text.trim().is_empty() {
            errors.push(ValidationError::new(
                format!("few_shot_examples[{i}].feedback_text"),
                "empty",
            ));
        }
    }
    errors
}

pub fn validate_rubric(rubric: &Rubric) -> Vec<ValidationError> {
    let mut errors = Vec::new();
    if rubric.id.as_str().is_empty() {
        errors.push(ValidationError::new("id", "rubric id empty"));
    }
    if rubric.criterion.trim().is_empty() {
        errors.push(ValidationError::new(
            format!("rubrics[{}].criterion", rubric.id),
            "criterion empty",
        ));
    }
    for (i, h) in rubric.historic_feedback.iter().enumerate() {
        if h.trim().is_empty() {
            errors.push(ValidationError::new(
                format!("rubrics[{}].historic_feedback[{i}]", rubric.id),
                "empty historic feedback entry",
            ));
        }
    }
    errors
}
