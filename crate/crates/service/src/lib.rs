//! HTTP and WebSocket transport for live trainer sessions.
//!
//! | Method | Path | Body | Reply |
//! |---|---|---|---|
//! | POST | `/sessions` | [`CreateSession`] | [`SessionCreated`] |
//! | GET | `/sessions/{id}` | | [`SessionStatus`] |
//! | DELETE | `/sessions/{id}` | | 204 |
//! | GET | `/sessions/{id}/events?from=n` | WebSocket upgrade | event stream |
//! | POST | `/sessions/{id}/feedback` | feedback message | feedback ack |
//! | POST | `/sessions/{id}/control` | control message | control echo |
//! | GET | `/sessions/{id}/snapshot` | | snapshot message |
//!
//! Messages use the envelope of [`pacman_core::session::protocol`]. The
//! WebSocket sends every event with `seq >= from` (default 1) and then
//! follows the session live; clients may send feedback and control messages
//! on the same socket. Errors are `{"v": 1, "error": "..."}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use pacman_core::envs::Layout;
use pacman_core::harness::ExperimentConfig;
use pacman_core::session::protocol::{ClientMessage, Envelope, Message, PROTOCOL_VERSION};
use pacman_core::session::{Pacing, Session, SessionError};
use serde::{Deserialize, Serialize};
use tokio::sync::{watch, Notify};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub config: ExperimentConfig,
    #[serde(default)]
    pub pacing: Pacing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub v: u32,
    pub id: u64,
    pub env: String,
    pub algorithm: String,
    pub maxepisode: usize,
    pub pacing: Pacing,
    pub layout: Layout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub v: u32,
    pub id: u64,
    pub episode: usize,
    pub step: u64,
    pub last_seq: u64,
    pub paused: bool,
    pub finished: bool,
    pub pacing: Pacing,
    pub feedback_accepted: u64,
    pub feedback_dropped: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub v: u32,
    pub error: String,
}

struct Live {
    session: Mutex<LiveState>,
    /// Wakes the driver after a control or feedback change.
    wake: Notify,
    /// Latest `seq`, for event streams to follow.
    seq: watch::Sender<u64>,
    stop: Notify,
}

struct LiveState {
    session: Session,
    /// Set when an episode fails; the session stops.
    error: Option<String>,
}

/// Shared server state: all sessions and the server clock.
#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<u64, Arc<Live>>>>,
    next_id: Arc<AtomicU64>,
    origin: Instant,
}

impl Default for AppState {
    fn default() -> Self {
        AppState {
            sessions: Arc::default(),
            next_id: Arc::new(AtomicU64::new(1)),
            origin: Instant::now(),
        }
    }
}

impl AppState {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn get(&self, id: u64) -> Result<Arc<Live>, ApiError> {
        self.sessions
            .lock()
            .unwrap()
            .get(&id)
            .cloned()
            .ok_or(ApiError(
                StatusCode::NOT_FOUND,
                format!("unknown session {id}"),
            ))
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            v: PROTOCOL_VERSION,
            error: self.1,
        };
        (self.0, Json(body)).into_response()
    }
}

fn bad_request(e: impl ToString) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, e.to_string())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(status).delete(remove))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/sessions/{id}/control", post(control))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::default())).await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<tokio::net::TcpListener> {
    tokio::net::TcpListener::bind(addr).await
}

async fn create(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<SessionCreated>, ApiError> {
    let Json(req) = body.map_err(|e| bad_request(e.body_text()))?;
    let session = Session::new(req.config, req.pacing).map_err(bad_request)?;
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    let created = SessionCreated {
        v: PROTOCOL_VERSION,
        id,
        env: session.env().name().to_string(),
        algorithm: session.config().algorithm.as_str().to_string(),
        maxepisode: session.config().maxepisode(),
        pacing: session.pacing(),
        layout: session.layout(),
    };
    let live = Arc::new(Live {
        session: Mutex::new(LiveState {
            session,
            error: None,
        }),
        wake: Notify::new(),
        seq: watch::channel(0).0,
        stop: Notify::new(),
    });
    state.sessions.lock().unwrap().insert(id, live.clone());
    tokio::spawn(drive(state.clone(), live));
    tracing::info!(id, "session created");
    Ok(Json(created))
}

/// The session's single thread of control: steps whenever pacing allows
/// and sleeps otherwise.
async fn drive(state: AppState, live: Arc<Live>) {
    loop {
        let wait = {
            let mut guard = live.session.lock().unwrap();
            let s = &mut *guard;
            if s.error.is_some() {
                return;
            }
            let now = state.now();
            if let Err(e) = s.session.tick(now) {
                tracing::warn!(error = %e, "session stopped");
                s.error = Some(e.to_string());
            }
            live.seq.send_replace(s.session.last_seq());
            if s.error.is_some() {
                return;
            }
            s.session.next_due(state.now())
        };
        let sleep = async {
            match wait {
                Some(d) => tokio::time::sleep(d).await,
                None => std::future::pending().await,
            }
        };
        tokio::select! {
            _ = sleep => {}
            _ = live.wake.notified() => {}
            _ = live.stop.notified() => return,
        }
    }
}

fn status_of(id: u64, live: &Live) -> SessionStatus {
    let s = live.session.lock().unwrap();
    let session = &s.session;
    SessionStatus {
        v: PROTOCOL_VERSION,
        id,
        episode: session.episode(),
        step: session.step(),
        last_seq: session.last_seq(),
        paused: session.is_paused(),
        finished: session.is_finished(),
        pacing: session.pacing(),
        feedback_accepted: session.feedback_accepted(),
        feedback_dropped: session.feedback_dropped(),
        error: s.error.clone(),
    }
}

async fn status(
    State(state): State<AppState>,
    Path(id): Path<u64>,
) -> Result<Json<SessionStatus>, ApiError> {
    let live = state.get(id)?;
    Ok(Json(status_of(id, &live)))
}

async fn remove(
    State(state): State<AppState>,
    Path(id): Path<u64>,
) -> Result<StatusCode, ApiError> {
    let live = state.sessions.lock().unwrap().remove(&id).ok_or(ApiError(
        StatusCode::NOT_FOUND,
        format!("unknown session {id}"),
    ))?;
    live.stop.notify_one();
    Ok(StatusCode::NO_CONTENT)
}

async fn snapshot(
    State(state): State<AppState>,
    Path(id): Path<u64>,
) -> Result<Json<Envelope>, ApiError> {
    let live = state.get(id)?;
    let snap = live.session.lock().unwrap().session.snapshot();
    Ok(Json(Envelope {
        v: PROTOCOL_VERSION,
        seq: None,
        message: Message::Snapshot(snap),
    }))
}

/// Applies one client message; the reply is the event it produced.
fn apply(state: &AppState, live: &Live, msg: ClientMessage) -> Result<Envelope, ApiError> {
    let result = {
        let mut s = live.session.lock().unwrap();
        let session = &mut s.session;
        let result = match msg {
            ClientMessage::Feedback {
                value,
                client_time_ms,
            } => session.submit_feedback(value, client_time_ms, state.now()),
            ClientMessage::Control(c) => session.control(c),
        };
        live.seq.send_replace(session.last_seq());
        result
    };
    live.wake.notify_one();
    let envelope = result.map_err(|e| match e {
        SessionError::Rejected(m) => ApiError(StatusCode::CONFLICT, m),
        other => bad_request(other),
    })?;
    if let Message::Feedback(f) = &envelope.message {
        if f.accepted == Some(false) && f.reason.as_deref() == Some("session is paused") {
            return Err(ApiError(StatusCode::CONFLICT, "session is paused".into()));
        }
    }
    Ok(envelope)
}

async fn post_message(
    state: AppState,
    id: u64,
    body: &str,
    expect: &str,
) -> Result<Json<Envelope>, ApiError> {
    let live = state.get(id)?;
    let msg = ClientMessage::parse(body).map_err(bad_request)?;
    let kind = match msg {
        ClientMessage::Feedback { .. } => "feedback",
        ClientMessage::Control(_) => "control",
    };
    if kind != expect {
        return Err(bad_request(format!(
            "expected a `{expect}` message, got `{kind}`"
        )));
    }
    apply(&state, &live, msg).map(Json)
}

async fn feedback(
    State(state): State<AppState>,
    Path(id): Path<u64>,
    body: String,
) -> Result<Json<Envelope>, ApiError> {
    post_message(state, id, &body, "feedback").await
}

async fn control(
    State(state): State<AppState>,
    Path(id): Path<u64>,
    body: String,
) -> Result<Json<Envelope>, ApiError> {
    post_message(state, id, &body, "control").await
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    from: Option<u64>,
}

async fn events(
    State(state): State<AppState>,
    Path(id): Path<u64>,
    Query(q): Query<EventsQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let live = state.get(id)?;
    let from = q.from.unwrap_or(1).max(1);
    Ok(ws.on_upgrade(move |socket| stream(state, live, socket, from)))
}

fn error_text(e: impl ToString) -> String {
    serde_json::to_string(&ErrorBody {
        v: PROTOCOL_VERSION,
        error: e.to_string(),
    })
    .unwrap()
}

async fn stream(state: AppState, live: Arc<Live>, socket: WebSocket, from: u64) {
    let (mut tx, mut rx) = socket.split();
    let mut seq_rx = live.seq.subscribe();
    let mut next = from;
    loop {
        let batch: Vec<String> = {
            let s = live.session.lock().unwrap();
            s.session
                .events_from(next)
                .iter()
                .map(Envelope::to_json)
                .collect()
        };
        next += batch.len() as u64;
        for text in batch {
            if tx.send(WsMessage::Text(text.into())).await.is_err() {
                return;
            }
        }
        tokio::select! {
            changed = seq_rx.changed() => {
                if changed.is_err() {
                    return;
                }
            }
            incoming = rx.next() => {
                let Some(Ok(frame)) = incoming else { return };
                let text = match frame {
                    WsMessage::Text(t) => t.to_string(),
                    WsMessage::Close(_) => return,
                    _ => continue,
                };
                // Replies travel as sequenced events; only errors are sent
                // directly.
                let reply = ClientMessage::parse(&text)
                    .map_err(|e| e.to_string())
                    .and_then(|msg| apply(&state, &live, msg).map_err(|e| e.1));
                if let Err(e) = reply {
                    if tx.send(WsMessage::Text(error_text(e).into())).await.is_err() {
                        return;
                    }
                }
            }
        }
    }
}
