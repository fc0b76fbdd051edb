//! HTTP service for live annotation sessions.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | create a session (201, or 202 while a large order is computed) |
//! | GET | `/sessions/{id}` | session status and progress |
//! | GET | `/sessions/{id}/next` | head document, or the terminal status with final θ |
//! | POST | `/sessions/{id}/annotations` | `{doc_id, label}` for the current head |
//! | GET | `/sessions/{id}/export` | JSONL records plus a summary line |
//! | GET | `/healthz` | liveness |
//!
//! Errors are `{"code": ..., "message": ...}`. There is no authentication:
//! this is a single-annotator local tool and should not be exposed publicly.

mod app;
mod error;
mod journal;
mod routes;
mod views;

use std::future::Future;

use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

pub use app::{AppState, ServiceConfig, StartupError, DEFAULT_BACKGROUND_THRESHOLD};
pub use error::{ApiError, ErrorBody};
pub use journal::{Journal, JournalEntry, JournalError};
pub use routes::{AnnotationRequest, CreateSessionRequest, MethodParams};
pub use views::{DocumentView, NextView, Progress, SessionView};

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/healthz", get(routes::healthz))
        .route("/sessions", post(routes::create_session))
        .route("/sessions/{id}", get(routes::get_session))
        .route("/sessions/{id}/next", get(routes::get_next))
        .route("/sessions/{id}/annotations", post(routes::post_annotation))
        .route("/sessions/{id}/export", get(routes::export_session));
    let api = match &state.config().static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(routes::not_found),
    };
    api.layer(TraceLayer::new_for_http()).with_state(state)
}

/// Serves until `shutdown` resolves, then syncs the journal.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    state.flush().map_err(std::io::Error::other)
}
