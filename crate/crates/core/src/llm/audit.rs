use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::Utc;
use parking_lot::Mutex;
use serde_json::json;

use super::{CompletionRequest, TransportError};

/// Append-only JSON-lines log of every provider attempt, plus pipeline
/// warnings. Write failures are logged and otherwise ignored so that auditing
/// never aborts a grading run.
pub struct AuditLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl AuditLog {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn record_attempt(
        &self,
        provider: &str,
        request: &CompletionRequest,
        attempt: u32,
        reply: &Result<String, TransportError>,
    ) {
        let (response, error) = match reply {
            Ok(raw) => (Some(raw.as_str()), None),
            Err(e) => (None, Some(e.0.as_str())),
        };
        self.write(json!({
            "type": "attempt",
            "at": Utc::now().to_rfc3339(),
            "provider": provider,
            "schema": request.response_schema.id(),
            "attempt": attempt,
            "temperature": request.temperature,
            "system_prompt": request.system_prompt,
            "user_prompt": request.user_prompt,
            "response": response,
            "error": error,
        }));
    }

    pub fn record_warning(&self, kind: &str, detail: serde_json::Value) {
        self.write(json!({
            "type": "warning",
            "at": Utc::now().to_rfc3339(),
            "kind": kind,
            "detail": detail,
        }));
    }

    fn write(&self, value: serde_json::Value) {
        let mut file = self.file.lock();
        if let Err(e) = writeln!(file, "{value}").and_then(|_| file.flush()) {
            tracing::error!(path = %self.path.display(), error = %e, "audit write failed");
        }
    }
}
