//! HTTP/JSON host for negotiation sessions.
//!
//! Each session lives in its own directory under the data directory as an
//! append-only event log plus snapshots. Mutations to one session are
//! serialized; different sessions proceed in parallel.

pub mod api;
pub mod config;
pub mod error;
pub mod store;
pub mod tokens;

use std::sync::Arc;

use tokio::net::TcpListener;

pub use api::router;
pub use config::{LogFormat, ServiceConfig};
pub use store::{SessionStore, StoreError};

/// Opens the store and serves until `shutdown` resolves.
pub async fn serve(
    config: &ServiceConfig,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> anyhow::Result<()> {
    let store = Arc::new(SessionStore::open(&config.data_dir, config.snapshot_every)?);
    tracing::info!(addr = %listener.local_addr()?, data_dir = %config.data_dir.display(), "listening");
    axum::serve(listener, router(store))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}
