//! HTTP surface: the live JSON-lines feed and the operator command endpoint.
//!
//! `GET /events?backlog=N` streams newline-delimited JSON until the consumer
//! disconnects or falls too far behind. `POST /commands` takes one command
//! object, e.g. `{"command":"acknowledge","alarm_id":3}`.

use std::convert::Infallible;
use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use futures::stream;
use pheromone_core::events::EventMessage;
use pheromone_core::monitor::{Command, CommandError};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};

use crate::broadcast::Broadcaster;
use crate::eventlog::to_line;
use crate::line::LineInput;

pub const DEFAULT_PORT: u16 = 7878;
pub const PORT_ENV: &str = "PHEROMONE_PORT";
pub const DEFAULT_HEARTBEAT: Duration = Duration::from_secs(10);

#[derive(Clone)]
pub struct AppState {
    pub broadcaster: Arc<Broadcaster>,
    pub line: mpsc::Sender<LineInput>,
    pub heartbeat: Duration,
}

#[derive(Debug, Deserialize)]
pub struct EventsQuery {
    #[serde(default)]
    pub backlog: usize,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/events", get(events))
        .route("/commands", post(commands))
        .with_state(state)
}

async fn events(State(state): State<AppState>, Query(q): Query<EventsQuery>) -> Response {
    let sub = state.broadcaster.subscribe(q.backlog);
    let heartbeat = state.heartbeat;
    let body = stream::unfold(sub.lines, move |mut rx| async move {
        let line = match tokio::time::timeout(heartbeat, rx.recv()).await {
            Ok(Some(line)) => line.to_string(),
            Ok(None) => return None,
            Err(_) => to_line(&EventMessage::Heartbeat {
                at: Utc::now().fixed_offset(),
            }),
        };
        Some((Ok::<_, Infallible>(Bytes::from(line + "\n")), rx))
    });
    (
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        Body::from_stream(body),
    )
        .into_response()
}

async fn commands(State(state): State<AppState>, Json(command): Json<Command>) -> Response {
    let (reply, rx) = oneshot::channel();
    if state.line.send(LineInput::Command { command, reply }).await.is_err() {
        return (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"error": "line stopped"}))).into_response();
    }
    match rx.await {
        Ok(Ok(record)) => (StatusCode::OK, Json(record)).into_response(),
        Ok(Err(e)) => {
            let status = match e {
                CommandError::UnknownAlarm(_) => StatusCode::NOT_FOUND,
                CommandError::InvalidTransition { .. } => StatusCode::CONFLICT,
            };
            (status, Json(json!({"error": e.to_string()}))).into_response()
        }
        Err(_) => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"error": "line stopped"}))).into_response(),
    }
}

pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Port from the environment, falling back to the default.
pub fn default_port() -> u16 {
    std::env::var(PORT_ENV)
        .ok()
        .and_then(|p| p.parse().ok())
        .unwrap_or(DEFAULT_PORT)
}
