use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use marginalia_core::llm::{AuditLog, Gateway};
use marginalia_core::model::{Assignment, AssignmentId, Essay, EssayId, Rubric, RunId};
use marginalia_core::pipeline::{Pipeline, PipelineConfig, RunOutput};
use marginalia_core::review::{RunStatus, Store};
use marginalia_core::Execution;
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use crate::config::Config;
use crate::error::ApiError;
use crate::state::AppState;

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Mock,
    Remote,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::Mock => "mock",
            ProviderKind::Remote => "remote",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub assignment_id: AssignmentId,
    pub essay_ids: Vec<EssayId>,
    /// Falls back to the `[pipeline]` section of the config file.
    #[serde(default)]
    pub config: Option<PipelineConfig>,
    #[serde(default)]
    pub provider: ProviderKind,
}

/// Builds the gateway for a run. `build` is always called off the async
/// runtime, since the HTTP provider uses a blocking client.
pub trait GatewayFactory: Send + Sync {
    /// Cheap availability check done before a run is accepted.
    fn check(&self, _kind: ProviderKind) -> Result<(), String> {
        Ok(())
    }

    fn build(&self, kind: ProviderKind) -> Result<Gateway, String>;
}

/// Mock gateway, or the HTTP provider configured from the environment.
pub struct DefaultFactory {
    config: Config,
    audit: Option<Arc<AuditLog>>,
}

impl DefaultFactory {
    pub fn new(config: &Config) -> anyhow::Result<Self> {
        let audit = match &config.audit_path {
            Some(p) => Some(Arc::new(AuditLog::open(p)?)),
            None => None,
        };
        Ok(Self {
            config: config.clone(),
            audit,
        })
    }

    fn with_audit(&self, gateway: Gateway) -> Gateway {
        match &self.audit {
            Some(a) => gateway.with_audit(a.clone()),
            None => gateway,
        }
    }
}

impl GatewayFactory for DefaultFactory {
    fn check(&self, kind: ProviderKind) -> Result<(), String> {
        match kind {
            ProviderKind::Mock => Ok(()),
            ProviderKind::Remote if !cfg!(feature = "remote") => {
                Err("this build has no remote provider; rebuild with --features remote".into())
            }
            ProviderKind::Remote => {
                let p = &self.config.provider;
                for var in [&p.url_env, &p.key_env] {
                    if std::env::var_os(var).is_none() {
                        return Err(format!("environment variable {var} is not set"));
                    }
                }
                Ok(())
            }
        }
    }

    fn build(&self, kind: ProviderKind) -> Result<Gateway, String> {
        match kind {
            ProviderKind::Mock => Ok(self.with_audit(Gateway::mock())),
            ProviderKind::Remote => self.remote().map(|g| self.with_audit(g)),
        }
    }
}

impl DefaultFactory {
    #[cfg(feature = "remote")]
    fn remote(&self) -> Result<Gateway, String> {
        use marginalia_core::llm::{RemoteConfig, RemoteProvider};
        let p = &self.config.provider;
        let rc = RemoteConfig::from_env_names(&p.url_env, &p.key_env, &p.model, &self.config.gateway)
            .map_err(|e| e.to_string())?;
        let provider = RemoteProvider::new(rc).map_err(|e| e.to_string())?;
        Ok(Gateway::new(Arc::new(provider), &self.config.gateway))
    }

    #[cfg(not(feature = "remote"))]
    fn remote(&self) -> Result<Gateway, String> {
        Err("this build has no remote provider; rebuild with --features remote".into())
    }
}

/// Everything a queued run needs, copied out of the store so the pipeline
/// runs without holding the store lock.
#[derive(Debug, Clone)]
pub struct Job {
    pub run_id: RunId,
    pub provider: ProviderKind,
    pub assignment: Assignment,
    pub rubrics: Vec<Rubric>,
    pub essays: Vec<Essay>,
    pub config: PipelineConfig,
}

/// Validates a request and records the run as queued.
pub fn enqueue(
    store: &mut Store,
    request: RunRequest,
    defaults: &PipelineConfig,
    run_id: RunId,
) -> Result<Job, ApiError> {
    let config = request.config.unwrap_or_else(|| defaults.clone());
    config
        .validate()
        .map_err(|e| ApiError::bad_request(e).with_field("config"))?;
    store.queue_run(
        run_id.clone(),
        request.assignment_id.clone(),
        request.essay_ids.clone(),
        request.provider.as_str(),
    )?;
    let assignment = store
        .assignment(&request.assignment_id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("assignment", request.assignment_id.as_str()))?;
    let rubrics = store.rubrics_for(&assignment.id)?;
    let essays = request
        .essay_ids
        .iter()
        .filter_map(|id| store.essay(id).cloned())
        .collect();
    Ok(Job {
        run_id,
        provider: request.provider,
        assignment,
        rubrics,
        essays,
        config,
    })
}

pub fn execute(job: &Job, gateway: Gateway, execution: Execution) -> RunOutput {
    Pipeline::new(job.run_id.clone(), gateway, job.config.clone()).run_batch_with(
        &job.assignment,
        &job.rubrics,
        &job.essays,
        execution,
    )
}

/// Per (assignment, provider) FIFO. Each run waits for the run queued before
/// it on the same key to finish, so a key has at most one active run.
#[derive(Default)]
pub struct RunQueue {
    tails: Mutex<HashMap<(AssignmentId, ProviderKind), oneshot::Receiver<()>>>,
}

/// Held by a running job; dropping it releases the next run on the key.
pub struct Turn {
    _done: oneshot::Sender<()>,
}

impl RunQueue {
    /// Joins the queue now and returns a future that resolves when it is
    /// this run's turn.
    fn join(
        &self,
        assignment: &AssignmentId,
        provider: ProviderKind,
    ) -> impl std::future::Future<Output = Turn> + Send + 'static {
        let (tx, rx) = oneshot::channel();
        let previous = self
            .tails
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert((assignment.clone(), provider), rx);
        async move {
            if let Some(prev) = previous {
                // an error means the previous run's task went away; either way it is done
                let _ = prev.await;
            }
            Turn { _done: tx }
        }
    }
}

/// Accepts a run and schedules it in the background. Returns once the run
/// is recorded as queued.
pub fn start_run(state: &Arc<AppState>, request: RunRequest) -> Result<RunId, ApiError> {
    state
        .factory()
        .check(request.provider)
        .map_err(|e| ApiError::provider(e).with_field("provider"))?;
    let run_id = RunId::from(uuid::Uuid::new_v4().to_string());
    let job = enqueue(&mut state.write(), request, &state.config.pipeline, run_id.clone())?;

    let pending = state.queue().join(&job.assignment.id, job.provider);
    let state = state.clone();
    tokio::spawn(async move {
        let _turn = pending.await;
        let run_id = job.run_id.clone();
        if let Err(e) = state.write().set_run_status(&run_id, RunStatus::Running, None) {
            tracing::error!(%run_id, "cannot mark run running: {e}");
            return;
        }
        tracing::info!(%run_id, essays = job.essays.len(), "run started");
        let worker = state.clone();
        let outcome = tokio::task::spawn_blocking(move || {
            let gateway = worker.factory().build(job.provider)?;
            Ok::<_, String>(execute(&job, gateway, worker.config.execution))
        })
        .await
        .unwrap_or_else(|e| Err(format!("run aborted: {e}")));

        let mut store = state.write();
        let recorded = match outcome {
            Ok(output) => store.finish_run(output).map(|status| {
                tracing::info!(%run_id, ?status, "run finished");
            }),
            Err(message) => {
                tracing::warn!(%run_id, "run failed: {message}");
                store.set_run_status(&run_id, RunStatus::Failed, Some(message))
            }
        };
        if let Err(e) = recorded {
            tracing::error!(%run_id, "cannot record run outcome: {e}");
        }
    });
    Ok(run_id)
}
