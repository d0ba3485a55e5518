//! HTTP JSON API for the balanced news reader: topics, ratio-bar feeds,
//! articles, opinion submission and maps, surveys, read events and the
//! study report. State is kept in JSON-lines files under the data
//! directory and replayed on start.

mod api;
pub mod config;
pub mod engine;
pub mod state;
pub mod store;

pub use api::{router, ApiError, SESSION_HEADER};
pub use config::ServerConfig;
pub use engine::{Engine, EngineParts};
pub use state::AppState;

use std::net::SocketAddr;
use std::sync::Arc;
use thiserror::Error;
use tokio::net::TcpListener;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("config: {0}")]
    Config(String),
    #[error("corrupt data file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Corpus(#[from] hearhere_core::corpus::CorpusError),
    #[error(transparent)]
    Stance(#[from] hearhere_core::stance::StanceError),
    #[error(transparent)]
    Kg(#[from] hearhere_core::kgraph::KgError),
    #[error(transparent)]
    Map(#[from] hearhere_core::opinion_map::MapError),
    #[error(transparent)]
    Feed(#[from] hearhere_core::feed::FeedError),
    #[error(transparent)]
    Study(#[from] hearhere_core::study::StudyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A bound, not yet running server.
pub struct Server {
    listener: TcpListener,
    app: axum::Router,
}

impl Server {
    /// Loads the engine, replays the data directory and binds the listener.
    pub async fn bind(config: &ServerConfig) -> Result<Self, GatewayError> {
        let engine = {
            let config = config.clone();
            tokio::task::spawn_blocking(move || Engine::load(&config))
                .await
                .map_err(|e| GatewayError::Config(format!("engine load panicked: {e}")))??
        };
        let state = AppState::open(Arc::new(engine), &config.data_dir, config.report_read_kind)?;
        Self::bind_state(config.bind, state, config.static_dir.as_deref()).await
    }

    pub async fn bind_state(
        addr: SocketAddr,
        state: Arc<AppState>,
        static_dir: Option<&std::path::Path>,
    ) -> Result<Self, GatewayError> {
        let listener = TcpListener::bind(addr).await?;
        Ok(Self {
            listener,
            app: router(state, static_dir),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, GatewayError> {
        Ok(self.listener.local_addr()?)
    }

    pub async fn run(self) -> Result<(), GatewayError> {
        axum::serve(self.listener, self.app).await?;
        Ok(())
    }
}

/// One-line JSON announcing that the server accepts connections.
pub fn readiness_line(addr: SocketAddr) -> String {
    serde_json::json!({ "event": "ready", "addr": addr.to_string(), "version": env!("CARGO_PKG_VERSION") }).to_string()
}
