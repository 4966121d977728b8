//! HTTP front end for play sessions.
//!
//! | method | path                   | body                          |
//! |--------|------------------------|-------------------------------|
//! | POST   | `/sessions`            | `{n, params?}`                |
//! | GET    | `/sessions/{id}/view`  |                               |
//! | POST   | `/sessions/{id}/move`  | `{dir}`                       |
//! | POST   | `/sessions/{id}/result`| `{solve_time_s, give_up?}`    |
//! | GET    | `/sessions/{id}/stats` |                               |
//! | GET    | `/healthz`             |                               |
//!
//! Each session sits behind its own async mutex, so requests for one session
//! run one at a time while different sessions proceed independently. Maze
//! generation runs on the blocking pool. Sessions are written to the data
//! directory on creation and after every result; player moves are kept in
//! memory only.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qmaze_core::bars::Direction;
use qmaze_core::session::{Session, SessionError, SessionParams, SessionStore};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex as AsyncMutex;

pub const ADDR_VAR: &str = "QMAZE_ADDR";
pub const DATA_DIR_VAR: &str = "QMAZE_DATA_DIR";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "qmaze-data";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid {ADDR_VAR} `{0}`")]
    Addr(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct Config {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
}

impl Config {
    /// Reads `QMAZE_ADDR` and `QMAZE_DATA_DIR`, falling back to defaults.
    pub fn from_env() -> Result<Self, ServiceError> {
        let addr = std::env::var(ADDR_VAR).unwrap_or_else(|_| DEFAULT_ADDR.to_string());
        let data_dir = std::env::var(DATA_DIR_VAR).unwrap_or_else(|_| DEFAULT_DATA_DIR.to_string());
        Ok(Config {
            addr: addr.parse().map_err(|_| ServiceError::Addr(addr))?,
            data_dir: data_dir.into(),
        })
    }
}

type Handle = Arc<AsyncMutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    store: SessionStore,
    live: Arc<Mutex<HashMap<String, Handle>>>,
}

impl AppState {
    pub fn new(store: SessionStore) -> Self {
        AppState {
            store,
            live: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    /// The in-memory session, loading its snapshot on first access.
    fn session(&self, id: &str) -> Result<Handle, ApiError> {
        let mut live = self.live.lock().expect("session map poisoned");
        if let Some(h) = live.get(id) {
            return Ok(h.clone());
        }
        let session = self.store.load(id)?;
        let handle = Arc::new(AsyncMutex::new(session));
        live.insert(id.to_string(), handle.clone());
        Ok(handle)
    }
}

/// An error rendered as `{"error": message}` with a matching status code.
#[derive(Debug)]
pub struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            SessionError::Params(_) | SessionError::NegativeTime(_) | SessionError::BadId(_) => {
                StatusCode::BAD_REQUEST
            }
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::OutOfOrder | SessionError::NotFinished | SessionError::GoalReached => {
                StatusCode::CONFLICT
            }
            SessionError::Adaptive(_) | SessionError::Io(_) | SessionError::Snapshot(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        (
            status,
            Json(serde_json::json!({ "error": self.0.to_string() })),
        )
            .into_response()
    }
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError(SessionError::Io(std::io::Error::other(e.to_string())))
}

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    pub n: usize,
    #[serde(default)]
    pub params: SessionParams,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: String,
    pub n: usize,
    pub set_size: usize,
}

#[derive(Debug, Deserialize)]
pub struct MoveRequest {
    pub dir: Direction,
}

#[derive(Debug, Deserialize)]
pub struct ResultRequest {
    pub solve_time_s: f64,
    #[serde(default)]
    pub give_up: bool,
}

async fn create(
    State(app): State<AppState>,
    Json(req): Json<CreateRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let id = uuid::Uuid::new_v4().simple().to_string();
    let store = app.store.clone();
    let session_id = id.clone();
    let session = tokio::task::spawn_blocking(move || -> Result<Session, SessionError> {
        let s = Session::create(session_id, req.n, req.params)?;
        store.save(&s)?;
        Ok(s)
    })
    .await
    .map_err(join_error)??;
    let body = CreateResponse {
        id: id.clone(),
        n: session.n,
        set_size: session.params.set_size,
    };
    tracing::info!(%id, n = session.n, "session created");
    app.live
        .lock()
        .expect("session map poisoned")
        .insert(id, Arc::new(AsyncMutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn view(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let handle = app.session(&id)?;
    let session = handle.lock().await;
    Ok(Json(session.get_view()?))
}

async fn move_player(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<MoveRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let handle = app.session(&id)?;
    let mut session = handle.lock().await;
    Ok(Json(session.move_player(req.dir)?))
}

async fn result(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ResultRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let handle = app.session(&id)?;
    let mut session = handle.lock_owned().await;
    let store = app.store.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        let out = session.submit_result(req.solve_time_s, req.give_up)?;
        store.save(&session)?;
        Ok::<_, SessionError>(out)
    })
    .await
    .map_err(join_error)??;
    Ok(Json(outcome))
}

async fn stats(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let handle = app.session(&id)?;
    let session = handle.lock().await;
    Ok(Json(session.stats()))
}

async fn healthz() -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ok" }))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create))
        .route("/sessions/{id}/view", get(view))
        .route("/sessions/{id}/move", post(move_player))
        .route("/sessions/{id}/result", post(result))
        .route("/sessions/{id}/stats", get(stats))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(config: Config) -> Result<(), ServiceError> {
    let store = SessionStore::open(&config.data_dir)?;
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    tracing::info!(addr = %listener.local_addr()?, data_dir = %config.data_dir.display(), "listening");
    axum::serve(listener, router(AppState::new(store)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
