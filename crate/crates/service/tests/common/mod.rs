//! Request helpers and a gated provider for the API tests.
#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use marginalia_core::llm::{
    mock_complete, CallContext, CompletionRequest, Gateway, GatewayConfig, Provider, TransportError,
};
use marginalia_core::review::Store;
use marginalia_core::Execution;
use marginalia_service::{router, AppState, Config, GatewayFactory, ProviderKind};
use serde_json::{json, Value};
use tower::ServiceExt;

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text)
            .unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.text))
    }
}

pub struct Client {
    app: Router,
    pub state: Arc<AppState>,
}

impl Client {
    pub fn new(state: Arc<AppState>) -> Self {
        Self {
            app: router(state.clone()),
            state,
        }
    }

    pub async fn send(&self, method: Method, uri: &str, body: Body, headers: &[(&str, &str)]) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let res = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = res.status();
        let content_type = res
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .unwrap_or_default()
            .to_string();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        Reply {
            status,
            content_type,
            text: String::from_utf8(bytes.to_vec()).unwrap(),
        }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send(Method::GET, uri, Body::empty(), &[]).await
    }

    pub async fn post(&self, uri: &str, body: Value) -> Reply {
        self.post_as(uri, body, None).await
    }

    pub async fn post_as(&self, uri: &str, body: Value, reviewer: Option<&str>) -> Reply {
        let mut headers = vec![("content-type", "application/json")];
        if let Some(r) = reviewer {
            headers.push(("x-reviewer-id", r));
        }
        self.send(Method::POST, uri, Body::from(body.to_string()), &headers).await
    }

    pub async fn post_text(&self, uri: &str, text: &str) -> Reply {
        self.send(Method::POST, uri, Body::from(text.to_string()), &[("content-type", "text/plain")])
            .await
    }

    /// Polls a run until it leaves queued/running.
    pub async fn wait_for_run(&self, run_id: &str) -> Value {
        for _ in 0..1000 {
            let run = self.get(&format!("/v1/runs/{run_id}")).await.json();
            let status = run["status"].as_str().unwrap().to_string();
            if status != "queued" && status != "running" {
                return run;
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        panic!("run {run_id} never finished");
    }

    pub async fn run_status(&self, run_id: &str) -> String {
        self.get(&format!("/v1/runs/{run_id}")).await.json()["status"]
            .as_str()
            .unwrap()
            .to_string()
    }

    pub async fn start_run(&self, body: Value) -> String {
        let r = self.post("/v1/runs", body).await;
        assert_eq!(r.status, StatusCode::ACCEPTED, "{}", r.text);
        r.json()["run_id"].as_str().unwrap().to_string()
    }
}

/// Mock gateway for both provider kinds.
pub struct MockFactory;

impl GatewayFactory for MockFactory {
    fn build(&self, _kind: ProviderKind) -> Result<Gateway, String> {
        Ok(Gateway::mock())
    }
}

/// Holds every `mock` call until opened. `remote` runs go straight through
/// the plain mock, so the two provider keys can be told apart.
#[derive(Clone, Default)]
pub struct Gate {
    open: Arc<(Mutex<bool>, Condvar)>,
    pub waiting_calls: Arc<AtomicUsize>,
}

impl Gate {
    pub fn open(&self) {
        let (lock, cv) = &*self.open;
        *lock.lock().unwrap() = true;
        cv.notify_all();
    }
}

struct GatedProvider(Gate);

impl Provider for GatedProvider {
    fn name(&self) -> &str {
        "gated-mock"
    }

    fn send(&self, req: &CompletionRequest, ctx: CallContext<'_>) -> Result<String, TransportError> {
        let (lock, cv) = &*self.0.open;
        let mut open = lock.lock().unwrap();
        if !*open {
            self.0.waiting_calls.fetch_add(1, Ordering::SeqCst);
        }
        while !*open {
            open = cv.wait(open).unwrap();
        }
        Ok(mock_complete(req, ctx.rubric, ctx.essay).raw_text)
    }
}

pub struct GatedFactory(pub Gate);

impl GatewayFactory for GatedFactory {
    fn build(&self, kind: ProviderKind) -> Result<Gateway, String> {
        Ok(match kind {
            ProviderKind::Mock => Gateway::new(Arc::new(GatedProvider(self.0.clone())), &GatewayConfig::default()),
            ProviderKind::Remote => Gateway::mock(),
        })
    }
}

pub fn test_config() -> Config {
    Config {
        // a blocked run must not hold the only worker of a small rayon pool
        execution: Execution::Sequential,
        ..Config::default()
    }
}

pub fn client() -> Client {
    Client::new(AppState::new(Store::in_memory(), test_config(), Arc::new(MockFactory)))
}

/// Three rubrics, one assignment, two essays. Under the mock provider E1
/// meets K1 and K2; E2 meets K3 only.
pub fn small_corpus() -> String {
    let records = [
        json!({"kind": "rubric", "id": "K1", "short_name": "supply", "criterion": "Explain that a poor harvest shifts supply left.",
               "historic_feedback": ["What happens to supply after a drought?"], "keyword_groups": [["supply"], ["harvest", "drought"]]}),
        json!({"kind": "rubric", "id": "K2", "short_name": "price", "criterion": "State that the equilibrium price rises.",
               "historic_feedback": [], "keyword_groups": [["price"], ["rises", "increases"]]}),
        json!({"kind": "rubric", "id": "K3", "short_name": "substitutes", "criterion": "Name a substitute buyers switch to.",
               "historic_feedback": ["Which other fruit could buyers choose?"], "keyword_groups": [["substitute", "switch"]]}),
        json!({"kind": "assignment", "id": "AS", "title": "Orange market", "prompt_text": "A frost hits the orange crop. Explain the market effects.",
               "rubric_ids": ["K1", "K2", "K3"]}),
        json!({"kind": "essay", "id": "E1", "assignment_id": "AS", "author_alias": "s1",
               "text": "The frost ruined the harvest, so supply falls. The price rises as a result."}),
        json!({"kind": "essay", "id": "E2", "assignment_id": "AS", "author_alias": "s2",
               "text": "Oranges cost more now. Buyers switch to apples as a substitute."}),
    ];
    records.iter().map(|r| r.to_string() + "\n").collect()
}

pub async fn ingested() -> Client {
    let c = client();
    let r = c.post_text("/v1/ingest", &small_corpus()).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
    c
}

pub fn run_body(essays: &[&str]) -> Value {
    json!({ "assignment_id": "AS", "essay_ids": essays, "provider": "mock" })
}
