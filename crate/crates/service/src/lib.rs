//! HTTP service and batch CLI plumbing around `marginalia-core`.

pub mod api;
pub mod config;
pub mod error;
pub mod ops;
pub mod runner;
pub mod state;

pub use api::router;
pub use config::Config;
pub use error::{ApiError, ErrorEnvelope};
pub use runner::{DefaultFactory, GatewayFactory, ProviderKind, RunRequest};
pub use state::AppState;

/// Serves `router` on the configured address until ctrl-c.
pub async fn serve(state: std::sync::Arc<AppState>) -> anyhow::Result<()> {
    let addr = state.config.addr();
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
