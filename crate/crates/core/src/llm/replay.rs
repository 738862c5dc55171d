//! Serves recorded provider replies from a transcript file.

use std::collections::HashMap;
use std::io;
use std::path::Path;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{CallContext, CompletionRequest, Provider, ResponseSchema, TransportError};
use crate::model::{EssayId, RubricId};

/// One recorded reply. Without `essay_id` the entry matches any essay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub rubric_id: RubricId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub essay_id: Option<EssayId>,
    pub schema: ResponseSchema,
    pub response: String,
}

type Key = (RubricId, Option<EssayId>, ResponseSchema);

/// Replies for the same key are served in recorded order; the last one
/// repeats once the others are used up.
pub struct ReplayProvider {
    name: String,
    queues: Mutex<HashMap<Key, (Vec<String>, usize)>>,
}

impl ReplayProvider {
    pub fn new(name: &str, entries: Vec<TranscriptEntry>) -> Self {
        let mut queues: HashMap<Key, (Vec<String>, usize)> = HashMap::new();
        for e in entries {
            queues
                .entry((e.rubric_id, e.essay_id, e.schema))
                .or_default()
                .0
                .push(e.response);
        }
        Self {
            name: format!("replay:{name}"),
            queues: Mutex::new(queues),
        }
    }

    pub fn parse(name: &str, jsonl: &str) -> Result<Self, serde_json::Error> {
        let entries = jsonl
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<TranscriptEntry>, _>>()?;
        Ok(Self::new(name, entries))
    }

    pub fn from_file(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("transcript");
        Self::parse(name, &text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

impl Provider for ReplayProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn send(
        &self,
        request: &CompletionRequest,
        ctx: CallContext<'_>,
    ) -> Result<String, TransportError> {
        let schema = request.response_schema;
        let mut queues = self.queues.lock();
        let specific = (ctx.rubric.id.clone(), Some(ctx.essay.id.clone()), schema);
        let generic = (ctx.rubric.id.clone(), None, schema);
        let key = if queues.contains_key(&specific) {
            specific
        } else {
            generic
        };
        let Some((replies, next)) = queues.get_mut(&key) else {
            return Err(TransportError(format!(
                "no recorded {} reply for rubric {} on essay {}",
                schema.id(),
                ctx.rubric.id,
                ctx.essay.id
            )));
        };
        let reply = replies[(*next).min(replies.len() - 1)].clone();
        *next += 1;
        Ok(reply)
    }
}
