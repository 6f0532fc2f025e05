//! HTTP API over an opened store.
//!
//! | route                                         | response                         |
//! |-----------------------------------------------|----------------------------------|
//! | `GET /api`                                    | every model's metadata           |
//! | `GET /api/<model>`                            | model metadata and availability  |
//! | `GET /api/<model>/<service>/<layer>`          | per-neuron availability of layer |
//! | `GET /api/<model>/<service>/<layer>/<neuron>` | the stored payload               |
//! | `GET /api/<model>/all/<layer>/<neuron>`       | every service, `null` if absent  |
//! | `GET /api/<model>/neuron2graph-search?query=` | matching `{layer, neuron}` list  |
//!
//! Successful responses wrap the payload as
//! `{"model", "service", "layer"?, "neuron"?, "data"}`. Errors are
//! `{"error", "message", "status"}` with status 400, 404 or 503.

mod error;
mod routes;

use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use axum::extract::Request;
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::Router;
use neuronhub_core::store::{Store, StoreError};
use thiserror::Error;
use tower_http::cors::CorsLayer;
use tower_http::services::{ServeDir, ServeFile};

pub use error::ApiError;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot open store {path}: {source}")]
    Store {
        path: PathBuf,
        #[source]
        source: StoreError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub bind: SocketAddr,
    pub store: PathBuf,
    pub assets: Option<PathBuf>,
}

/// Builds the application router. The explorer is mounted at `/viz` when an
/// assets directory is given; unknown `/viz` paths fall back to its
/// `index.html` so deep links load the client.
pub fn router(store: Arc<Store>, assets: Option<&Path>) -> Router {
    let mut app = routes::api(store);
    if let Some(dir) = assets {
        let viz = ServeDir::new(dir).fallback(ServeFile::new(dir.join("index.html")));
        app = app.nest_service("/viz", viz);
    }
    app.layer(CorsLayer::permissive())
        .layer(middleware::from_fn(log_request))
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_owned();
    let start = Instant::now();
    let response = next.run(req).await;
    tracing::info!(
        %method,
        %path,
        status = response.status().as_u16(),
        latency_us = start.elapsed().as_micros() as u64,
        "request"
    );
    response
}

/// Opens the store read-only and serves until `shutdown` resolves.
pub async fn serve(config: ServeConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
    let store = Store::open(&config.store).map_err(|source| ServeError::Store {
        path: config.store.clone(),
        source,
    })?;
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|source| ServeError::BindFailure {
            addr: config.bind,
            source,
        })?;
    tracing::info!(addr = %listener.local_addr()?, models = store.models().count(), "serving");
    let app = router(Arc::new(store), config.assets.as_deref());
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}
