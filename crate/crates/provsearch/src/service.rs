//! HTTP JSON API backing the browser interface.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use provsearch_core::eval::{validate_rating, EvaluationReport, RatingSubmission};
use provsearch_core::pipeline::{RetrievalConfig, SearchEngine};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::{Mutex, RwLock};
use tower_http::services::ServeDir;

use crate::commands;
use crate::config::AppConfig;
use crate::error::CliError;

/// Shared, read-mostly state. The ratings journal and the latest report are
/// the only mutable parts.
pub struct AppState {
    pub config: AppConfig,
    /// Engine with the configured generator (remote when a key is set).
    pub engine: SearchEngine,
    pub stub_engine: SearchEngine,
    journal: Mutex<()>,
    latest: RwLock<Option<EvaluationReport>>,
}

impl AppState {
    pub fn new(config: AppConfig, engine: SearchEngine) -> Self {
        let stub_engine = engine.with_generator(commands::stub_generator());
        let latest = commands::load_latest_report(&config.reports_dir);
        Self { config, engine, stub_engine, journal: Mutex::new(()), latest: RwLock::new(latest) }
    }

    /// Loads corpus and index from `config`.
    pub fn load(config: AppConfig) -> Result<Self, CliError> {
        let generator = match config.remote_generator() {
            Some(g) => Arc::new(g) as _,
            None => commands::stub_generator(),
        };
        let engine = commands::load_engine(&config, generator)?;
        Ok(Self::new(config, engine))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": { "code": self.code, "message": self.message } }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        let status = r.status();
        let code = if status == StatusCode::UNSUPPORTED_MEDIA_TYPE { "unsupported_media_type" } else { "invalid_body" };
        Self::new(status, code, r.body_text())
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(ApiError::from)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    pub query: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub stub: Option<bool>,
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "records": state.engine.corpus.len(),
        "indexed": state.engine.index.len(),
        "dimension": state.engine.index.dimension(),
        "generator": state.engine.generator.kind(),
    }))
}

async fn search(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<SearchRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    if req.query.trim().is_empty() {
        return Err(ApiError::invalid("invalid_query", "query must not be empty"));
    }
    let cfg = RetrievalConfig::new(req.k.unwrap_or(state.config.retrieval.k), state.config.retrieval.similarity_floor)
        .map_err(|e| ApiError::invalid("invalid_k", e.to_string()))?;
    let engine = if req.stub.unwrap_or(false) { state.stub_engine.clone() } else { state.engine.clone() };
    let outcome = tokio::task::spawn_blocking(move || engine.run_search(&req.query, &cfg))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    match outcome {
        Ok(o) => Ok(Json(o).into_response()),
        Err(e) => {
            let code = match CliError::from(e) {
                CliError::Auth(m) => return Err(ApiError::new(StatusCode::BAD_GATEWAY, "upstream_auth", m)),
                other => other.to_string(),
            };
            Err(ApiError::new(StatusCode::BAD_GATEWAY, "pipeline_failed", code))
        }
    }
}

async fn record(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    match state.engine.corpus.get(&id) {
        Some(r) => Ok(Json(r.clone()).into_response()),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no record {id:?}"))),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingRequest {
    pub query_id: String,
    pub rating: i64,
    #[serde(default)]
    pub note: Option<String>,
}

async fn rate(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<RatingRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    if req.query_id.trim().is_empty() {
        return Err(ApiError::invalid("invalid_query_id", "query_id must not be empty"));
    }
    let rating = validate_rating(req.rating).map_err(|e| ApiError::invalid("invalid_rating", e.to_string()))?;
    let submission =
        RatingSubmission { query_id: req.query_id, rating, note: req.note, timestamp: chrono::Utc::now() };
    let line = serde_json::to_string(&submission).expect("submission serializes");
    let path = state.config.ratings_path.clone();
    let _guard = state.journal.lock().await;
    tokio::task::spawn_blocking(move || append_line(&path, &line))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "journal_write_failed", e.to_string()))?;
    Ok((StatusCode::CREATED, Json(submission)).into_response())
}

fn append_line(path: &std::path::Path, line: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")?;
    f.sync_data()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRequest {
    pub suite_path: PathBuf,
    #[serde(default)]
    pub stub: Option<bool>,
}

async fn evaluate(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<EvaluateRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    let engine = if req.stub.unwrap_or(false) { state.stub_engine.clone() } else { state.engine.clone() };
    let st = state.clone();
    let report = {
        let _guard = state.journal.lock().await;
        tokio::task::spawn_blocking(move || {
            commands::evaluate(&engine, &st.config, &req.suite_path, &st.config.ratings_path)
        })
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::invalid("invalid_suite", e.to_string()))?
    };
    if let Err(e) = commands::save_latest_report(&state.config.reports_dir, &report) {
        tracing::warn!(error = %e, "could not persist report");
    }
    *state.latest.write().await = Some(report.clone());
    Ok(Json(report).into_response())
}

async fn latest_report(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    match state.latest.read().await.as_ref() {
        Some(r) => Ok(Json(r.clone()).into_response()),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "no_report", "no evaluation has been run yet")),
    }
}

async fn api_not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "unknown endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    let ui_dir = state.config.service.ui_dir.clone();
    let api = Router::new()
        .route("/search", post(search))
        .route("/records/{id}", get(record))
        .route("/ratings", post(rate))
        .route("/evaluate", post(evaluate))
        .route("/report/latest", get(latest_report))
        .fallback(api_not_found);
    let app = Router::new().route("/healthz", get(healthz)).nest("/api", api).with_state(state);
    if ui_dir.is_dir() {
        app.fallback_service(ServeDir::new(ui_dir))
    } else {
        app
    }
}

/// Binds and serves until interrupted.
pub async fn serve(state: Arc<AppState>) -> Result<(), CliError> {
    let addr = state.config.service.bind;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| CliError::Bind { addr: addr.to_string(), reason: e.to_string() })?;
    let local = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!("listening on http://{local}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Runtime(e.to_string()))
}
