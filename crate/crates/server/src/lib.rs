//! HTTP and WebSocket front end for [`SessionService`].
//!
//! Routes:
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | POST | `/api/sessions` | `{scenarioId, participantId, context?}` | 201 `{sessionId, wsUrl, token}` |
//! | GET | `/api/sessions/{id}/state` | | session view |
//! | POST | `/api/sessions/{id}/complete` | | summary |
//! | GET | `/api/sessions/{id}/events` | `format=jsonl\|csv`, bearer token | export |
//! | POST | `/api/sessions/{id}/advance` | `{toMs}` | server events (injected time only) |
//! | GET | `/api/scenarios`, `/api/scenarios/{id}` | | ids, scenario document |
//! | GET | `/ws/{id}` | `token=` | WebSocket |
//!
//! On the socket, a client Ping is answered only after the events caused by
//! every earlier client frame have been sent, so it works as a barrier.

mod client;
mod engines;
mod scenarios;

use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::Deserialize;
use shine_core::log::{ExportError, ExportFormat, StorageError, TimeMode};
use shine_core::session::{CreateSessionRequest, ServiceError, SessionService, WireEvent};
use tokio::sync::broadcast::error::{RecvError, TryRecvError};

pub use client::NetworkDriver;
pub use engines::{NetworkEngines, RestEngine, WsEngine};
pub use scenarios::{load_scenario_dir, ScenarioLoad, SkippedScenario};

/// Environment variable holding the researcher bearer token for exports.
pub const RESEARCH_TOKEN_ENV: &str = "SHINE_RESEARCH_TOKEN";

/// Period of the live-mode scheduler.
pub const TICK_PERIOD: Duration = Duration::from_millis(250);

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<SessionService>,
    /// Exports are refused when unset.
    pub research_token: Option<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/state", get(get_state))
        .route("/api/sessions/{id}/complete", post(complete_session))
        .route("/api/sessions/{id}/events", get(export_events))
        .route("/api/sessions/{id}/advance", post(advance))
        .route("/api/scenarios", get(list_scenarios))
        .route("/api/scenarios/{id}", get(get_scenario))
        .route("/ws/{id}", get(ws_upgrade))
        .with_state(state)
}

/// Serves `state` on `listener` until `shutdown` resolves. Live services
/// also get the scheduler.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let ticker = (state.service.config().time_mode == TimeMode::Live).then(|| spawn_ticker(state.service.clone(), TICK_PERIOD));
    let result = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await;
    if let Some(t) = ticker {
        t.abort();
    }
    result
}

/// Fires due triggers and idle expiries until the task is dropped.
pub fn spawn_ticker(service: Arc<SessionService>, period: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(period);
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            interval.tick().await;
            if let Err(e) = service.tick_all().await {
                eprintln!("scheduler tick failed: {e}");
            }
        }
    })
}

/// JSON error body `{error, message}` with a status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"error": self.code, "message": self.message});
        (self.status, Json(body)).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let (status, code) = match &e {
            ServiceError::UnknownScenario(_) => (StatusCode::NOT_FOUND, "unknown_scenario"),
            ServiceError::Params(_) => (StatusCode::BAD_REQUEST, "invalid_context"),
            ServiceError::InvalidRequest(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
            ServiceError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ServiceError::Unauthorized => (StatusCode::UNAUTHORIZED, "unauthorized"),
            ServiceError::Expired(_) => (StatusCode::GONE, "session_expired"),
            ServiceError::NotActive(_) => (StatusCode::CONFLICT, "session_ended"),
            ServiceError::NotInjected => (StatusCode::CONFLICT, "live_time"),
            ServiceError::Sim(_) => (StatusCode::BAD_REQUEST, "invalid_time"),
            ServiceError::Export(ExportError::Storage(StorageError::UnknownSession(_))) => {
                (StatusCode::NOT_FOUND, "unknown_session")
            }
            ServiceError::Storage(_) | ServiceError::Export(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(v)| v).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.body_text()))
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let request = json_body(body)?;
    let created = state.service.create_session(request).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn get_state(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.service.get_state(&id).await?))
}

async fn complete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.service.complete_session(&id).await?))
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

async fn export_events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<ExportQuery>,
    headers: HeaderMap,
) -> Result<impl IntoResponse, ApiError> {
    let presented = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match (&state.research_token, presented) {
        (Some(expected), Some(got)) if expected == got => {}
        _ => return Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "researcher token required")),
    }
    let format: ExportFormat = query
        .format
        .as_deref()
        .unwrap_or("jsonl")
        .parse()
        .map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, "invalid_format", e))?;
    let bytes = state.service.export(&id, format)?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], bytes))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct AdvanceBody {
    to_ms: u64,
}

async fn advance(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<AdvanceBody>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let body = json_body(body)?;
    Ok(Json(state.service.advance(&id, body.to_ms).await?))
}

async fn list_scenarios(State(state): State<AppState>) -> impl IntoResponse {
    let ids: Vec<&str> = state.service.scenario_ids().collect();
    Json(serde_json::json!({ "scenarios": ids }))
}

async fn get_scenario(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let scenario = state
        .service
        .scenario(&id)
        .ok_or_else(|| ApiError::from(ServiceError::UnknownScenario(id.clone())))?;
    Ok(Json(scenario.spec().clone()))
}

#[derive(Deserialize)]
struct WsQuery {
    token: Option<String>,
}

async fn ws_upgrade(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<WsQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let token = query.token.unwrap_or_default();
    state.service.authorize(&id, &token)?;
    Ok(ws.on_upgrade(move |socket| session_socket(state.service, id, token, socket)))
}

fn frame(event: &WireEvent) -> Message {
    Message::Text(serde_json::to_string(event).expect("wire events serialize").into())
}

async fn session_socket(service: Arc<SessionService>, id: String, token: String, socket: WebSocket) {
    let Ok(mut sub) = service.subscribe(&id, &token).await else { return };
    let (mut tx, mut rx) = socket.split();
    if tx.send(frame(&sub.initial)).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            incoming = rx.next() => {
                let Some(Ok(msg)) = incoming else { break };
                match msg {
                    Message::Text(text) => {
                        if let Err(e) = service.handle_client_text(&id, text.as_str()).await {
                            eprintln!("session {id}: {e}");
                            break;
                        }
                    }
                    Message::Ping(payload) => {
                        if !drain(&service, &id, &mut sub.events, &mut tx).await {
                            break;
                        }
                        if tx.send(Message::Pong(payload)).await.is_err() {
                            break;
                        }
                        continue;
                    }
                    Message::Close(_) => break,
                    Message::Binary(_) | Message::Pong(_) => {}
                }
                if !drain(&service, &id, &mut sub.events, &mut tx).await {
                    break;
                }
            }
            event = sub.events.recv() => {
                let ok = match event {
                    Ok(e) => tx.send(frame(&e)).await.is_ok(),
                    Err(RecvError::Lagged(_)) => resync(&service, &id, &mut tx).await,
                    Err(RecvError::Closed) => false,
                };
                if !ok {
                    break;
                }
            }
        }
    }
}

async fn resync<S>(service: &SessionService, id: &str, tx: &mut S) -> bool
where
    S: SinkExt<Message> + Unpin,
{
    match service.resync(id).await {
        Ok(e) => tx.send(frame(&e)).await.is_ok(),
        Err(_) => false,
    }
}

/// Forwards everything already broadcast; false once the socket is gone.
async fn drain<S>(
    service: &SessionService,
    id: &str,
    events: &mut tokio::sync::broadcast::Receiver<WireEvent>,
    tx: &mut S,
) -> bool
where
    S: SinkExt<Message> + Unpin,
{
    loop {
        match events.try_recv() {
            Ok(e) => {
                if tx.send(frame(&e)).await.is_err() {
                    return false;
                }
            }
            Err(TryRecvError::Empty) => return true,
            Err(TryRecvError::Lagged(_)) => {
                if !resync(service, id, tx).await {
                    return false;
                }
            }
            Err(TryRecvError::Closed) => return false,
        }
    }
}
