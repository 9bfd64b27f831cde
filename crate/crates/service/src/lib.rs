//! HTTP facade over distributed sessions.
//!
//! Each session lives behind its own mutex, so mutations on one session are
//! totally ordered while different sessions proceed independently. Every
//! mutation bumps a sequence number that the event stream reports.

mod error;
mod session;

pub use error::ServiceError;
pub use session::{
    ApplyRequest, ApplyResponse, CaseInput, Change, ConfigView, CreateSession, DeliverRequest, DeliverResponse,
    DeliveryMode, DeliveryView, LocationView, MergedView, MessageView, NodeView, Notification, PartitionInput, Session,
    Snapshot, Summary, TermView,
};

use std::collections::HashMap;
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::sync::watch;
use tower_http::cors::{Any, CorsLayer};

/// Longest a long-poll request may wait.
const MAX_POLL: Duration = Duration::from_secs(60);

struct SessionCell {
    session: Mutex<Session>,
    seq: watch::Sender<u64>,
}

impl SessionCell {
    fn new(session: Session) -> Arc<Self> {
        let (seq, _) = watch::channel(session.seq());
        Arc::new(SessionCell { session: Mutex::new(session), seq })
    }

    fn read<T>(&self, f: impl FnOnce(&Session) -> T) -> T {
        f(&self.session.lock().unwrap_or_else(|p| p.into_inner()))
    }

    /// Run a mutation and publish the new sequence number.
    fn write<T>(&self, f: impl FnOnce(&mut Session) -> T) -> T {
        let mut s = self.session.lock().unwrap_or_else(|p| p.into_inner());
        let out = f(&mut s);
        self.seq.send_replace(s.seq());
        out
    }
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<SessionCell>>>>,
    next_id: Arc<AtomicU64>,
}

impl AppState {
    pub fn new() -> Self {
        AppState::default()
    }

    fn fresh_id(&self) -> String {
        format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed) + 1)
    }

    fn insert(&self, session: Session) -> Summary {
        let summary = session.summary();
        self.sessions.write().unwrap_or_else(|p| p.into_inner()).insert(session.id.clone(), SessionCell::new(session));
        summary
    }

    fn get(&self, id: &str) -> Result<Arc<SessionCell>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::not_found("UnknownSession", format!("no session `{id}`")))
    }
}

type Res<T> = Result<Json<T>, ServiceError>;

async fn create(State(app): State<AppState>, Json(req): Json<CreateSession>) -> Result<Response, ServiceError> {
    let session = Session::create(app.fresh_id(), req)?;
    tracing::info!(id = %session.id, "session created");
    Ok((StatusCode::CREATED, Json(app.insert(session))).into_response())
}

async fn restore(State(app): State<AppState>, Json(snap): Json<Snapshot>) -> Result<Response, ServiceError> {
    let session = Session::restore(app.fresh_id(), &snap)?;
    Ok((StatusCode::CREATED, Json(app.insert(session))).into_response())
}

async fn list(State(app): State<AppState>) -> Json<Vec<Summary>> {
    let cells: Vec<Arc<SessionCell>> =
        app.sessions.read().unwrap_or_else(|p| p.into_inner()).values().cloned().collect();
    let mut out: Vec<Summary> = cells.iter().map(|c| c.read(Session::summary)).collect();
    out.sort_by_key(|s| s.id[1..].parse::<u64>().unwrap_or(u64::MAX));
    Json(out)
}

async fn summary(State(app): State<AppState>, Path(id): Path<String>) -> Res<Summary> {
    Ok(Json(app.get(&id)?.read(Session::summary)))
}

async fn remove(State(app): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ServiceError> {
    app.get(&id)?;
    app.sessions.write().unwrap_or_else(|p| p.into_inner()).remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

async fn locations(State(app): State<AppState>, Path(id): Path<String>) -> Res<Vec<LocationView>> {
    Ok(Json(app.get(&id)?.read(Session::locations)))
}

async fn config(State(app): State<AppState>, Path((id, loc)): Path<(String, String)>) -> Res<ConfigView> {
    app.get(&id)?.read(|s| s.config(&loc)).map(Json)
}

async fn enabled(
    State(app): State<AppState>,
    Path((id, loc)): Path<(String, String)>,
) -> Res<Vec<gag_core::engine::EnabledEntry>> {
    app.get(&id)?.read(|s| s.enabled(&loc)).map(Json)
}

async fn apply(
    State(app): State<AppState>,
    Path((id, loc)): Path<(String, String)>,
    Json(req): Json<ApplyRequest>,
) -> Res<ApplyResponse> {
    app.get(&id)?.write(|s| s.apply(&loc, &req)).map(Json)
}

async fn messages(State(app): State<AppState>, Path(id): Path<String>) -> Res<Vec<MessageView>> {
    Ok(Json(app.get(&id)?.read(Session::messages)))
}

async fn deliver(
    State(app): State<AppState>,
    Path((id, mid)): Path<(String, String)>,
    body: Option<Json<DeliverRequest>>,
) -> Res<DeliverResponse> {
    let req = body.map(|Json(r)| r).unwrap_or_default();
    app.get(&id)?.write(|s| s.deliver(&mid, &req)).map(Json)
}

async fn merged(State(app): State<AppState>, Path(id): Path<String>) -> Res<MergedView> {
    app.get(&id)?.read(Session::merged).map(Json)
}

async fn trace(State(app): State<AppState>, Path(id): Path<String>) -> Res<serde_json::Value> {
    let (text, trace) = app.get(&id)?.read(|s| (s.trace_text(), s.trace.clone()));
    Ok(Json(serde_json::json!({ "text": text, "trace": trace })))
}

async fn snapshot(State(app): State<AppState>, Path(id): Path<String>) -> Res<Snapshot> {
    Ok(Json(app.get(&id)?.read(Session::snapshot)))
}

#[derive(Debug, Deserialize)]
struct PollQuery {
    #[serde(default)]
    after: u64,
    #[serde(default)]
    timeout_ms: Option<u64>,
}

/// Server-sent events when asked for, a long poll otherwise.
async fn events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<PollQuery>,
    headers: HeaderMap,
) -> Result<Response, ServiceError> {
    let cell = app.get(&id)?;
    let wants_stream =
        headers.get(header::ACCEPT).and_then(|v| v.to_str().ok()).is_some_and(|v| v.contains("text/event-stream"));
    if wants_stream {
        let rx = cell.seq.subscribe();
        let stream =
            futures::stream::unfold((cell, rx, q.after, Vec::new()), |(cell, mut rx, after, mut pending)| async move {
                loop {
                    if let Some(n) = pending.pop() {
                        let n: Notification = n;
                        let ev = SseEvent::default().id(n.seq.to_string()).json_data(&n).expect("serializable");
                        return Some((Ok::<_, Infallible>(ev), (cell, rx, n.seq, pending)));
                    }
                    let mut fresh = cell.read(|s| s.events_after(after));
                    if !fresh.is_empty() {
                        fresh.reverse();
                        pending = fresh;
                        continue;
                    }
                    rx.changed().await.ok()?;
                }
            });
        return Ok(Sse::new(stream).keep_alive(KeepAlive::default()).into_response());
    }
    let timeout = q.timeout_ms.map_or(Duration::ZERO, Duration::from_millis).min(MAX_POLL);
    let mut rx = cell.seq.subscribe();
    let _ = tokio::time::timeout(timeout, rx.wait_for(|seq| *seq > q.after)).await;
    let (events, last_seq) = cell.read(|s| (s.events_after(q.after), s.seq()));
    Ok(Json(serde_json::json!({ "events": events, "last_seq": last_seq })).into_response())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/restore", post(restore))
        .route("/sessions/{id}", get(summary).delete(remove))
        .route("/sessions/{id}/locations", get(locations))
        .route("/sessions/{id}/locations/{loc}/config", get(config))
        .route("/sessions/{id}/locations/{loc}/enabled", get(enabled))
        .route("/sessions/{id}/locations/{loc}/apply", post(apply))
        .route("/sessions/{id}/messages", get(messages))
        .route("/sessions/{id}/messages/{mid}/deliver", post(deliver))
        .route("/sessions/{id}/merged", get(merged))
        .route("/sessions/{id}/trace", get(trace))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .route("/sessions/{id}/events", get(events))
        .layer(CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any))
        .with_state(state)
}

/// Bind and serve until the process is stopped.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(AppState::new())).await
}
