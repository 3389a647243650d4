//! HTTP and WebSocket front end for simulation sessions.
//!
//! `POST /api/sessions` creates a paused session from a scenario config,
//! `GET /api/sessions/{id}/stream` upgrades to a socket carrying one NDJSON
//! message per text frame. Stepping happens in one task per session.

mod error;
mod state;
mod worker;
mod ws;

pub use error::ApiError;
pub use state::{AppState, Attachment, Commander, ServerConfig, SessionDescriptor, SessionState, DEFAULT_LOG_TTL, DEFAULT_MAX_SESSIONS};
pub use worker::{Outbound, Pacing};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use claw_core::scenario::ScenarioConfig;
use std::net::SocketAddr;
use tower_http::services::ServeDir;

const PLACEHOLDER: &str = include_str!("../assets/index.html");

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/sessions", get(list).post(create))
        .route("/api/sessions/{id}", get(describe).delete(remove))
        .route("/api/sessions/{id}/log", get(log))
        .route("/api/sessions/{id}/stream", get(ws::stream));
    let api = match &state.config().assets_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    };
    api.with_state(state)
}

async fn list(State(app): State<AppState>) -> Json<Vec<SessionDescriptor>> {
    Json(app.list())
}

async fn create(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::BadRequest("body is not UTF-8".into()))?;
    let cfg = ScenarioConfig::from_json(text)?;
    let desc = app.create_session(cfg)?;
    Ok((StatusCode::CREATED, Json(desc)).into_response())
}

async fn describe(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionDescriptor>, ApiError> {
    app.get(&id).map(Json)
}

async fn remove(State(app): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    app.delete(&id).map(|_| StatusCode::NO_CONTENT)
}

async fn log(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    match app.log(&id)? {
        Some(log) => Ok(([(header::CONTENT_TYPE, "text/csv")], log.to_csv_string()).into_response()),
        None => Err(ApiError::BadRequest(format!("session {id} has not ended yet"))),
    }
}

/// Binds and serves until the process is stopped. Terminal sessions are
/// reaped once their TTL has passed.
pub async fn serve(addr: SocketAddr, config: ServerConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(listener, config).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, config: ServerConfig) -> std::io::Result<()> {
    serve_state(listener, AppState::new(config)).await
}

pub async fn serve_state(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    let reaper = state.clone();
    let every = (state.config().log_ttl / 4).clamp(std::time::Duration::from_millis(100), std::time::Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            let n = reaper.reap_expired();
            if n > 0 {
                tracing::info!("reaped {n} expired sessions");
            }
        }
    });
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
