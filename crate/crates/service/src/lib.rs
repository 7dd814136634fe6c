//! JSON-over-HTTP front end for [`tmart::session::SessionStore`].
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | `{cfg, policy}` |
//! | POST | `/sessions/{id}/observations` | `{t, expected_k, meta?}` |
//! | POST | `/sessions/{id}/policy` | `{policy, expected_k}` |
//! | GET | `/sessions/{id}/state` | |
//! | GET | `/sessions/{id}/trajectory` | |
//!
//! Errors come back as `{"error": kind, "message": ...}` with 404 for an
//! unknown session, 409 for a stale `expected_k`, 422 for anything the
//! engine refuses and 500 for storage failures.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use tmart::session::{CreateSession, Event, PolicyAck, SessionState, SessionStore, Snapshot};
use tmart::{Error, StakePolicy};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub token: Option<String>,
}

#[derive(Clone)]
struct AppState {
    store: Arc<SessionStore>,
    token: Option<Arc<str>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationRequest {
    pub t: f64,
    pub expected_k: u64,
    #[serde(default)]
    pub meta: Option<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyRequest {
    pub policy: StakePolicy,
    pub expected_k: u64,
}

#[derive(Debug)]
pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.0.to_string();
        let (status, body) = match &self.0 {
            Error::SessionNotFound(id) => (StatusCode::NOT_FOUND, json!({"error": "not_found", "id": id})),
            Error::Conflict { expected, actual } => (
                StatusCode::CONFLICT,
                json!({"error": "conflict", "expected_k": expected, "current_expected_k": actual}),
            ),
            Error::InvalidConfig { field, .. } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": "invalid_config", "field": field}),
            ),
            Error::OutOfBounds { index, value, lo, hi } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": "out_of_bounds", "k": index, "t": value, "lo": lo, "hi": hi}),
            ),
            Error::InvalidPolicy(_) | Error::InvalidStake(_) | Error::InvalidMixture(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, json!({"error": "invalid_policy"}))
            }
            Error::Storage(_) | Error::ReplayMismatch { .. } => {
                tracing::error!(%message, "storage failure");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "storage"}))
            }
            _ => (StatusCode::UNPROCESSABLE_ENTITY, json!({"error": "rejected"})),
        };
        let mut body = body;
        body["message"] = Value::String(message);
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs blocking store work (it fsyncs) off the async workers.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> tmart::Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::Storage(format!("worker panicked: {e}"))))?
        .map_err(ApiError)
}

async fn create_session(
    State(app): State<AppState>,
    Json(req): Json<CreateSession>,
) -> ApiResult<(StatusCode, Json<SessionState>)> {
    let store = app.store.clone();
    let state = blocking(move || store.create(req)).await?;
    tracing::info!(id = %state.id, "session created");
    Ok((StatusCode::CREATED, Json(state)))
}

async fn append_observation(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ObservationRequest>,
) -> ApiResult<Json<Snapshot>> {
    let store = app.store.clone();
    let snap = blocking(move || store.append_observation(&id, req.t, req.expected_k, req.meta)).await?;
    Ok(Json(snap))
}

async fn change_policy(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<PolicyRequest>,
) -> ApiResult<Json<PolicyAck>> {
    let store = app.store.clone();
    let ack = blocking(move || store.change_policy(&id, req.policy, req.expected_k)).await?;
    Ok(Json(ack))
}

async fn get_state(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionState>> {
    let state = app.store.state(&id)?;
    Ok(Json(SessionState::clone(&state)))
}

async fn get_trajectory(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<Event>>> {
    Ok(Json(app.store.trajectory(&id)?))
}

async fn list_sessions(State(app): State<AppState>) -> Json<Vec<String>> {
    Json(app.store.ids())
}

async fn health() -> &'static str {
    "ok"
}

async fn require_token(State(app): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &app.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|v| v == &**token);
        if !ok {
            return (
                StatusCode::UNAUTHORIZED,
                Json(json!({"error": "unauthorized", "message": "missing or wrong bearer token"})),
            )
                .into_response();
        }
    }
    next.run(req).await
}

/// Builds the router over an already opened store.
pub fn router(store: Arc<SessionStore>, token: Option<String>) -> Router {
    let state = AppState {
        store,
        token: token.map(Into::into),
    };
    let api = Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/observations", post(append_observation))
        .route("/sessions/{id}/policy", post(change_policy))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/trajectory", get(get_trajectory))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state);
    Router::new().route("/health", get(health)).merge(api)
}

/// Opens the store (replaying every log) and builds the router.
pub fn app(config: &ServiceConfig) -> tmart::Result<Router> {
    let store = SessionStore::open(&config.data_dir)?;
    Ok(router(Arc::new(store), config.token.clone()))
}

/// Serves until ctrl-c.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let app = app(&config).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, dir = %config.data_dir.display(), "session service listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
