//! The exosquat job service: training, evaluation, sweeps and self-checks
//! run as background jobs with polled status, plus stateless compute
//! endpoints for the pure operations. All heavy work runs on the blocking
//! pool; job state lives in a shared in-memory table.

mod handlers;
mod jobs;

pub use jobs::{JobStore, ServiceState};

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;

pub fn build_router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/health", get(handlers::health))
        .route("/api/v1/presets", get(handlers::presets))
        .route("/api/v1/jobs", post(handlers::submit_job).get(handlers::list_jobs))
        .route("/api/v1/jobs/{id}", get(handlers::job_status))
        .route("/api/v1/jobs/{id}/cancel", post(handlers::cancel_job))
        .route("/api/v1/jobs/{id}/artifacts", get(handlers::job_artifacts))
        .route("/api/v1/compute/cop", post(handlers::compute_cop))
        .route("/api/v1/compute/pd-torque", post(handlers::compute_pd_torque))
        .route("/api/v1/compute/reward", post(handlers::compute_reward))
        .route("/api/v1/compute/gae", post(handlers::compute_gae))
        .with_state(state)
}

/// Bind and serve; returns the bound address (useful with port 0) and a
/// handle that resolves when the server stops.
pub async fn serve(
    addr: SocketAddr,
    out_root: PathBuf,
) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let state = Arc::new(ServiceState::new(out_root));
    let router = build_router(state);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let bound = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router).await {
            tracing::error!("server stopped: {e}");
        }
    });
    Ok((bound, handle))
}
