//! Operations shared by the HTTP handlers and the CLI.

use marginalia_core::lint::LintWarning;
use marginalia_core::records::Corpus;
use marginalia_core::review::{ReviewError, Store};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub rubrics: usize,
    pub assignments: usize,
    pub essays: usize,
    pub warnings: Vec<LintWarning>,
}

/// Adds rubrics, then assignments, then essays. Stops at the first rejected
/// record; everything before it stays stored.
pub fn ingest(store: &mut Store, corpus: Corpus) -> Result<IngestSummary, ReviewError> {
    let mut summary = IngestSummary::default();
    for r in corpus.rubrics {
        summary.warnings.extend(store.put_rubric(r)?);
        summary.rubrics += 1;
    }
    for a in corpus.assignments {
        store.put_assignment(a)?;
        summary.assignments += 1;
    }
    for e in corpus.essays {
        store.put_essay(e)?;
        summary.essays += 1;
    }
    Ok(summary)
}
