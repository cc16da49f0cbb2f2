//! HTTP/JSON service over the chordcorr pipeline: datasets, sessions with
//! focus navigation, polled compute jobs and a shared estimate cache.

mod api;
mod error;
mod state;

use std::net::SocketAddr;
use std::sync::Arc;

pub use api::router;
pub use error::ApiError;
pub use state::{AppState, DatasetMeta, JobStatus, JobView, NavEntry, ServiceConfig, SessionView, Stats};

/// Router with fresh state.
pub fn app(config: ServiceConfig) -> axum::Router {
    router(Arc::new(AppState::new(config)))
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app(config)).await
}
