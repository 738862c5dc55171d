//! Model access: request shaping, validate-and-retry, providers.

mod audit;
mod limit;
mod mock;
#[cfg(feature = "remote")]
mod remote;
mod replay;
mod schema;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Essay, Rubric};

pub use audit::AuditLog;
pub use limit::Limiter;
pub use mock::{mock_complete, MockProvider};
#[cfg(feature = "remote")]
pub use remote::{RemoteConfig, RemoteProvider, KEY_ENV, URL_ENV};
pub use replay::{ReplayProvider, TranscriptEntry};
pub use schema::{
    validate, EvidenceOutput, FeedbackOutput, JudgmentOutput, ResponseSchema, StructuredOutput,
};

pub const DEFAULT_TEMPERATURE: f64 = 0.05;
pub const DEFAULT_MAX_RETRIES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub response_schema: ResponseSchema,
    pub temperature: f64,
    pub max_retries: u32,
}

impl CompletionRequest {
    pub fn new(schema: ResponseSchema, system_prompt: String, user_prompt: String) -> Self {
        Self {
            system_prompt,
            user_prompt,
            response_schema: schema,
            temperature: DEFAULT_TEMPERATURE,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub parsed: StructuredOutput,
    pub raw_text: String,
    pub provider_name: String,
    pub attempt_count: u32,
}

/// What a call is about. Remote providers ignore it; the mock and replay
/// providers key their answers on it.
#[derive(Debug, Clone, Copy)]
pub struct CallContext<'a> {
    pub rubric: &'a Rubric,
    pub essay: &'a Essay,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct TransportError(pub String);

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    /// Sends one attempt and returns the raw reply text.
    fn send(&self, request: &CompletionRequest, ctx: CallContext<'_>)
        -> Result<String, TransportError>;
}

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum GatewayError {
    #[error("provider {provider} unreachable after {attempts} attempts: {message}")]
    ProviderUnreachable {
        provider: String,
        attempts: u32,
        message: String,
    },
    #[error("{schema:?} reply invalid after {} attempts: {last_error}", raw_attempts.len())]
    SchemaViolation {
        schema: ResponseSchema,
        raw_attempts: Vec<String>,
        last_error: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub concurrency_limit: usize,
    pub timeout_secs: u64,
    pub max_tokens: u32,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            concurrency_limit: 4,
            timeout_secs: 60,
            max_tokens: 1024,
        }
    }
}

/// Shared handle around one provider. Cheap to clone.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn Provider>,
    limiter: Arc<Limiter>,
    audit: Option<Arc<AuditLog>>,
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, config: &GatewayConfig) -> Self {
        Self {
            provider,
            limiter: Arc::new(Limiter::new(config.concurrency_limit)),
            audit: None,
        }
    }

    pub fn mock() -> Self {
        Self::new(Arc::new(MockProvider), &GatewayConfig::default())
    }

    pub fn with_audit(mut self, audit: Arc<AuditLog>) -> Self {
        self.audit = Some(audit);
        self
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    pub fn audit(&self) -> Option<&AuditLog> {
        self.audit.as_deref()
    }

    pub fn complete(
        &self,
        request: &CompletionRequest,
        ctx: CallContext<'_>,
    ) -> Result<CompletionResult, GatewayError> {
        let _permit = self.limiter.acquire();
        complete_inner(request, self.provider.as_ref(), ctx, self.audit.as_deref())
    }
}

/// One call with validate-and-retry; at most `1 + max_retries` attempts.
pub fn complete(
    request: &CompletionRequest,
    provider: &dyn Provider,
    ctx: CallContext<'_>,
) -> Result<CompletionResult, GatewayError> {
    complete_inner(request, provider, ctx, None)
}

fn complete_inner(
    request: &CompletionRequest,
    provider: &dyn Provider,
    ctx: CallContext<'_>,
    audit: Option<&AuditLog>,
) -> Result<CompletionResult, GatewayError> {
    let schema = request.response_schema;
    let mut raw_attempts = Vec::new();
    let mut last_error = String::new();
    let mut last_was_transport = false;
    let mut attempt_request = request.clone();
    let total = request.max_retries + 1;

    for attempt in 1..=total {
        let reply = provider.send(&attempt_request, ctx);
        if let Some(log) = audit {
            log.record_attempt(provider.name(), &attempt_request, attempt, &reply);
        }
        match reply {
            Err(e) => {
                tracing::warn!(provider = provider.name(), attempt, error = %e, "provider call failed");
                last_error = e.0;
                last_was_transport = true;
            }
            Ok(raw) => match validate(schema, &raw) {
                Ok(parsed) => {
                    return Ok(CompletionResult {
                        parsed,
                        raw_text: raw,
                        provider_name: provider.name().to_string(),
                        attempt_count: attempt,
                    })
                }
                Err(e) => {
                    tracing::debug!(attempt, error = %e, "schema validation failed");
                    attempt_request.user_prompt = format!(
                        "{}\n\nYour previous reply could not be used ({e}). Reply again with only a JSON object of the form {}",
                        request.user_prompt,
                        schema.shape()
                    );
                    raw_attempts.push(raw);
                    last_error = e;
                    last_was_transport = false;
                }
            },
        }
    }

    if last_was_transport {
        Err(GatewayError::ProviderUnreachable {
            provider: provider.name().to_string(),
            attempts: total,
            message: last_error,
        })
    } else {
        Err(GatewayError::SchemaViolation {
            schema,
            raw_attempts,
            last_error,
        })
    }
}
