//! Chat-completions style HTTP provider.
//!
//! The endpoint URL and bearer key come from the environment. The request
//! body follows the widely used `messages` / `temperature` / `response_format`
//! shape; the reply text is read from `choices[0].message.content`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CallContext, CompletionRequest, GatewayConfig, Provider, TransportError};

pub const URL_ENV: &str = "FEEDBACK_PROVIDER_URL";
pub const KEY_ENV: &str = "FEEDBACK_PROVIDER_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub url: String,
    pub api_key: String,
    pub model: String,
    pub timeout_secs: u64,
    pub max_tokens: u32,
}

impl RemoteConfig {
    /// Reads the URL and key from the named environment variables.
    pub fn from_env_names(
        url_var: &str,
        key_var: &str,
        model: &str,
        gateway: &GatewayConfig,
    ) -> Result<Self, TransportError> {
        let read = |name: &str| {
            std::env::var(name).map_err(|_| TransportError(format!("environment variable {name} is not set")))
        };
        Ok(Self {
            url: read(url_var)?,
            api_key: read(key_var)?,
            model: model.to_string(),
            timeout_secs: gateway.timeout_secs,
            max_tokens: gateway.max_tokens,
        })
    }

    pub fn from_env(model: &str, gateway: &GatewayConfig) -> Result<Self, TransportError> {
        Self::from_env_names(URL_ENV, KEY_ENV, model, gateway)
    }
}

pub struct RemoteProvider {
    config: RemoteConfig,
    name: String,
    client: reqwest::blocking::Client,
}

impl RemoteProvider {
    /// Must not be called from inside an async runtime thread.
    pub fn new(config: RemoteConfig) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(Self {
            name: format!("remote:{}", config.model),
            config,
            client,
        })
    }

    pub fn request_body(&self, request: &CompletionRequest) -> serde_json::Value {
        json!({
            "model": self.config.model,
            "temperature": request.temperature,
            "max_tokens": self.config.max_tokens,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
        })
    }
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl Provider for RemoteProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn send(
        &self,
        request: &CompletionRequest,
        _ctx: CallContext<'_>,
    ) -> Result<String, TransportError> {
        let response = self
            .client
            .post(&self.config.url)
            .bearer_auth(&self.config.api_key)
            .json(&self.request_body(request))
            .send()
            .map_err(|e| TransportError(format!("request failed: {e}")))?;
        let status = response.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(TransportError(format!("authentication rejected ({status})")));
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(TransportError(format!("provider returned {status}: {body}")));
        }
        let reply: ChatReply = response
            .json()
            .map_err(|e| TransportError(format!("unreadable provider reply: {e}")))?;
        reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| TransportError("provider reply had no content".into()))
    }
}
