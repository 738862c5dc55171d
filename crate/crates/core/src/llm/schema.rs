use serde::{Deserialize, Serialize};

use crate::model::Verdict;

/// Registry of response shapes the pipeline can ask for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSchema {
    EvidenceList,
    Judgment,
    FeedbackMessage,
}

impl ResponseSchema {
    pub fn id(self) -> &'static str {
        match self {
            ResponseSchema::EvidenceList => "evidence_list",
            ResponseSchema::Judgment => "judgment",
            ResponseSchema::FeedbackMessage => "feedback_message",
        }
    }

    /// JSON shape shown to the model.
    pub fn shape(self) -> &'static str {
        match self {
            ResponseSchema::EvidenceList => r#"{"quotes": ["<verbatim sentence from the essay>", ...]}"#,
            ResponseSchema::Judgment => {
                r#"{"verdict": "met" | "missed", "rationale": "<why, citing the evidence>"}"#
            }
            ResponseSchema::FeedbackMessage => {
                r#"{"feedback": "<message to the student>", "rationale": "<why this feedback>"}"#
            }
        }
    }

    pub fn parse(id: &str) -> Option<Self> {
        [Self::EvidenceList, Self::Judgment, Self::FeedbackMessage]
            .into_iter()
            .find(|s| s.id() == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceOutput {
    pub quotes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentOutput {
    pub verdict: Verdict,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackOutput {
    pub feedback: String,
    #[serde(default)]
    pub rationale: String,
}

/// A provider reply that passed validation for its schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "schema", rename_all = "snake_case")]
pub enum StructuredOutput {
    EvidenceList(EvidenceOutput),
    Judgment(JudgmentOutput),
    FeedbackMessage(FeedbackOutput),
}

impl StructuredOutput {
    pub fn schema(&self) -> ResponseSchema {
        match self {
            StructuredOutput::EvidenceList(_) => ResponseSchema::EvidenceList,
            StructuredOutput::Judgment(_) => ResponseSchema::Judgment,
            StructuredOutput::FeedbackMessage(_) => ResponseSchema::FeedbackMessage,
        }
    }
}

/// Parses `raw` as the given schema. Models often wrap JSON in prose or code
/// fences, so the outermost `{...}` object is extracted first.
pub fn validate(schema: ResponseSchema, raw: &str) -> Result<StructuredOutput, String> {
    let body = extract_object(raw).ok_or_else(|| "no JSON object found".to_string())?;
    let err = |e: serde_json::Error| format!("does not match {}: {e}", schema.id());
    let parsed = match schema {
        ResponseSchema::EvidenceList => {
            let out: EvidenceOutput = serde_json::from_str(body).map_err(err)?;
            if out.quotes.iter().any(|q| q.trim().is_empty()) {
                return Err("quotes must be non-empty strings".into());
            }
            StructuredOutput::EvidenceList(out)
        }
        ResponseSchema::Judgment => {
            let out: JudgmentOutput = serde_json::from_str(body).map_err(err)?;
            if out.rationale.trim().is_empty() {
                return Err("rationale must be non-empty".into());
            }
            StructuredOutput::Judgment(out)
        }
        ResponseSchema::FeedbackMessage => {
            let out: FeedbackOutput = serde_json::from_str(body).map_err(err)?;
            if out.feedback.trim().is_empty() {
                return Err("feedback must be non-empty".into());
            }
            StructuredOutput::FeedbackMessage(out)
        }
    };
    Ok(parsed)
}

fn extract_object(raw: &str) -> Option<&str> {
    let start = raw.find('{')?;
    let end = raw.rfind('}')?;
    (end > start).then(|| &raw[start..=end])
}
