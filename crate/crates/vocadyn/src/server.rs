//! JSON-over-HTTP review service.
//!
//! - `GET  /api/performances`
//! - `GET  /api/performances/{id}/visualization?width=N`
//! - `GET  /api/performances/{id}/audio` (the vocal stem, for playback)
//! - `POST /api/performances/{id}/decision` with `{"decision": "accept"|"reject", "note": "..."}`
//!
//! Everything else is served from the static UI directory when one is given.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::error::Error;
use crate::manifest::Verdict;
use crate::pipeline::{build_visualization, ManifestStore, Workspace, DEFAULT_WIDTH};

/// Upper bound on envelope buckets per request.
pub const MAX_WIDTH: usize = 20_000;

#[derive(Clone)]
struct AppState {
    store: Arc<ManifestStore>,
    workspace: Arc<Workspace>,
}

pub fn router(store: Arc<ManifestStore>, workspace: Workspace, static_dir: Option<PathBuf>) -> Router {
    let state = AppState { store, workspace: Arc::new(workspace) };
    let api = Router::new()
        .route("/api/performances", get(list))
        .route("/api/performances/{id}/visualization", get(visualization))
        .route("/api/performances/{id}/audio", get(audio))
        .route("/api/performances/{id}/decision", post(decision))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}

struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownId(_) | Error::MissingFile { .. } => StatusCode::NOT_FOUND,
            Error::StageOrder { .. } => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

async fn list(State(s): State<AppState>) -> Response {
    Json(s.store.snapshot().as_ref().clone()).into_response()
}

#[derive(Deserialize)]
struct WidthQuery {
    width: Option<usize>,
}

async fn visualization(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<WidthQuery>,
) -> Result<Response, ApiError> {
    let record = s.store.get(&id).ok_or(Error::UnknownId(id))?;
    let width = q.width.unwrap_or(DEFAULT_WIDTH).clamp(1, MAX_WIDTH);
    let bundle = tokio::task::spawn_blocking(move || build_visualization(&s.workspace, &record, width))
        .await
        .map_err(join_error)??;
    Ok(Json(bundle).into_response())
}

async fn audio(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let record = s.store.get(&id).ok_or_else(|| Error::UnknownId(id.clone()))?;
    let path = s.workspace.resolve(&record.stem_path);
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| Error::MissingFile { id, what: "vocal stem", path: path.clone() })?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    decision: Verdict,
    #[serde(default)]
    note: String,
    #[serde(default)]
    by: Option<String>,
}

async fn decision(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let body: DecisionBody =
        serde_json::from_slice(&body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))?;
    let by = body.by.unwrap_or_else(|| "reviewer".to_owned());
    let store = s.store.clone();
    let updated = tokio::task::spawn_blocking(move || store.record_decision(&id, body.decision, &body.note, &by))
        .await
        .map_err(join_error)??;
    Ok(Json(updated).into_response())
}
