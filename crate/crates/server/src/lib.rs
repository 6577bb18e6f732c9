//! HTTP/JSON front end for the questionnaire service.
//!
//! The student plane lives under `/api/session`, the admin plane under
//! `/api/admin` and `/api/results`. Anything else falls through to an
//! optional static directory.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::Router;
use teval_core::admin::AdminService;
use teval_core::auth::PasswordHash;
use teval_core::model::{now_utc, DEFAULT_QUESTION_COUNT};
use teval_core::store::{StoreError, SyncPolicy};
use teval_core::{QuestionBank, SessionEngine, Store};
use thiserror::Error;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

pub mod error;
pub mod extract;
pub mod print;
mod routes;

pub use extract::FORWARDED_FOR;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// `None` keeps everything in memory.
    pub store_path: Option<PathBuf>,
    /// `None` uses the bundled sample bank.
    pub questions_file: Option<PathBuf>,
    pub question_count: usize,
    pub admin_user: String,
    pub admin_pass_hash: Option<PasswordHash>,
    pub trust_proxy_header: bool,
    /// Applied at startup when set; otherwise the stored value is kept.
    pub deadline_seconds: Option<u64>,
    pub static_dir: Option<PathBuf>,
    pub sync: SyncPolicy,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            store_path: None,
            questions_file: None,
            question_count: DEFAULT_QUESTION_COUNT,
            admin_user: "admin".into(),
            admin_pass_hash: None,
            trust_proxy_header: false,
            deadline_seconds: None,
            static_dir: None,
            sync: SyncPolicy::EveryWrite,
        }
    }
}

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("store: {0}")]
    Store(#[from] StoreError),
    #[error("question bank: {0}")]
    Bank(#[from] teval_core::bank::BankError),
    #[error("{0}")]
    Session(#[from] teval_core::session::SessionError),
    #[error("deadline must be a positive number of seconds")]
    InvalidDeadline,
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<SessionEngine>,
    pub admin: Arc<AdminService>,
    pub trust_proxy_header: bool,
    static_dir: Option<PathBuf>,
}

pub fn build_state(config: &ServerConfig) -> Result<AppState, StartupError> {
    let store = match &config.store_path {
        Some(path) => Store::open_with(path, config.sync)?,
        None => Store::in_memory(),
    };
    store.set_admin_credentials(&config.admin_user, config.admin_pass_hash.clone());
    if let Some(deadline) = config.deadline_seconds {
        if deadline == 0 {
            return Err(StartupError::InvalidDeadline);
        }
        if store.config().deadline_seconds != Some(deadline) {
            store.update_config::<StoreError>("startup", now_utc(), |current, _| {
                let mut next = current.clone();
                next.deadline_seconds = Some(deadline);
                Ok(next)
            })?;
        }
    }
    let bank = match &config.questions_file {
        Some(path) => QuestionBank::from_file(path, config.question_count)?,
        None => QuestionBank::sample(),
    };
    let engine = Arc::new(SessionEngine::new(Arc::new(store), bank)?);
    let admin = AdminService::new(engine.clone()).with_bank_source(config.questions_file.clone());
    Ok(AppState {
        engine,
        admin: Arc::new(admin),
        trust_proxy_header: config.trust_proxy_header,
        static_dir: config.static_dir.clone(),
    })
}

pub fn router(state: AppState) -> Router {
    let api = routes::api();
    let app = match &state.static_dir {
        Some(dir) => {
            api.route("/api/{*rest}", axum::routing::any(routes::not_found)).fallback_service(ServeDir::new(dir))
        }
        None => api.fallback(routes::not_found),
    };
    app.layer(TraceLayer::new_for_http()).with_state(state)
}

/// Serves until the listener fails or a shutdown signal arrives.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state).into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(shutdown_signal())
        .await
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}
