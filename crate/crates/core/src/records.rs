//! JSON-lines ingestion format. Each line is one object tagged by `kind`:
//! `rubric`, `assignment` or `essay`, with the remaining fields named as in
//! the model types.

use serde::{Deserialize, Serialize};

use crate::model::{Assignment, Essay, Rubric};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IngestRecord {
    Rubric(Rubric),
    Assignment(Assignment),
    Essay(Essay),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub rubrics: Vec<Rubric>,
    pub assignments: Vec<Assignment>,
    pub essays: Vec<Essay>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct IngestError {
    pub line: usize,
    pub message: String,
}

impl Corpus {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut corpus = Corpus::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let record: IngestRecord = serde_json::from_str(line).map_err(|e| IngestError {
                line: i + 1,
                message: e.to_string(),
            })?;
            corpus.push(record);
        }
        Ok(corpus)
    }

    pub fn push(&mut self, record: IngestRecord) {
        match record {
            IngestRecord::Rubric(r) => self.rubrics.push(r),
            IngestRecord::Assignment(a) => self.assignments.push(a),
            IngestRecord::Essay(e) => self.essays.push(e),
        }
    }

    /// Rubrics, then assignments, then essays, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let records = self
            .rubrics
            .iter()
            .cloned()
            .map(IngestRecord::Rubric)
            .chain(self.assignments.iter().cloned().map(IngestRecord::Assignment))
            .chain(self.essays.iter().cloned().map(IngestRecord::Essay));
        for r in records {
            out.push_str(&serde_json::to_string(&r).expect("ingest records serialize"));
            out.push('\n');
        }
        out
    }
}
