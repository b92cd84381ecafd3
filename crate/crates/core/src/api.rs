//! HTTP/JSON adapter over [`Engine`].
//!
//! Each handler calls one engine method on the blocking pool and serializes
//! the result unchanged. Errors are `{"error": {"code", "message"}}` with the
//! status from [`Error::status`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::NaiveDateTime;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::catalog::{PathRule, RecordId};
use crate::engine::{Engine, EntryQuery, IngestOptions, NewLink, NewNote, NewSample};
use crate::error::Error;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("address {addr} is already in use")]
    PortInUse { addr: String },
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("invalid CORS origin `{0}`")]
    InvalidOrigin(String),
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub error: ErrorBody,
}

/// An error ready to be sent as a response.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody { code: "bad_request".into(), message: message.into() },
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        ApiError { status, body: ErrorBody { code: e.code().into(), message: e.to_string() } }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorEnvelope { error: self.body })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Shared = State<Arc<Engine>>;

async fn blocking<T, F>(engine: Arc<Engine>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Engine) -> Result<T, Error> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody { code: "internal".into(), message: e.to_string() },
        })?
        .map(Json)
        .map_err(ApiError::from)
}

/// Parses an optional JSON body; an empty body gives the default.
fn optional_body<T: DeserializeOwned + Default>(bytes: &Bytes) -> Result<T, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

async fn health(State(engine): Shared) -> impl IntoResponse {
    Json(engine.health())
}

async fn list_samples(State(engine): Shared) -> ApiResult<Vec<crate::catalog::Sample>> {
    blocking(engine, |e| e.samples()).await
}

async fn create_sample(
    State(engine): Shared,
    body: Result<Json<NewSample>, JsonRejection>,
) -> Result<(StatusCode, Json<crate::catalog::Sample>), ApiError> {
    let Json(new) = body?;
    Ok((StatusCode::CREATED, blocking(engine, move |e| e.register_sample(new)).await?))
}

async fn list_rules(State(engine): Shared) -> ApiResult<crate::catalog::PathRuleSet> {
    blocking(engine, |e| e.rules()).await
}

async fn create_rule(
    State(engine): Shared,
    body: Result<Json<PathRule>, JsonRejection>,
) -> Result<(StatusCode, Json<crate::catalog::PathRuleSet>), ApiError> {
    let Json(rule) = body?;
    Ok((StatusCode::CREATED, blocking(engine, move |e| e.register_rule(rule)).await?))
}

async fn list_entries(
    State(engine): Shared,
    query: Result<Query<EntryQuery>, QueryRejection>,
) -> ApiResult<Vec<crate::catalog::CatalogEntry>> {
    let Query(query) = query?;
    blocking(engine, move |e| e.query(&query)).await
}

async fn get_entry(
    State(engine): Shared,
    id: Result<Path<RecordId>, PathRejection>,
) -> ApiResult<crate::catalog::CatalogEntry> {
    let Path(id) = id?;
    blocking(engine, move |e| e.entry(id)).await
}

async fn delete_entry(
    State(engine): Shared,
    id: Result<Path<RecordId>, PathRejection>,
) -> ApiResult<crate::engine::Deleted> {
    let Path(id) = id?;
    blocking(engine, move |e| e.delete_entry(id)).await
}

async fn entry_plot(
    State(engine): Shared,
    id: Result<Path<RecordId>, PathRejection>,
) -> ApiResult<crate::tabular::PlotPayload> {
    let Path(id) = id?;
    blocking(engine, move |e| e.plot(id)).await
}

async fn entry_links(
    State(engine): Shared,
    id: Result<Path<RecordId>, PathRejection>,
) -> ApiResult<Vec<crate::catalog::Link>> {
    let Path(id) = id?;
    blocking(engine, move |e| e.links(id)).await
}

async fn create_link(
    State(engine): Shared,
    body: Result<Json<NewLink>, JsonRejection>,
) -> Result<(StatusCode, Json<crate::catalog::Link>), ApiError> {
    let Json(new) = body?;
    Ok((StatusCode::CREATED, blocking(engine, move |e| e.add_link(new)).await?))
}

async fn create_note(
    State(engine): Shared,
    body: Result<Json<NewNote>, JsonRejection>,
) -> Result<(StatusCode, Json<crate::engine::NoteCreated>), ApiError> {
    let Json(new) = body?;
    Ok((StatusCode::CREATED, blocking(engine, move |e| e.add_note(new)).await?))
}

async fn sample_history(
    State(engine): Shared,
    Path(name): Path<String>,
) -> ApiResult<Vec<crate::catalog::HistoryItem>> {
    blocking(engine, move |e| e.history(&name)).await
}

async fn run_ingest(State(engine): Shared, body: Bytes) -> ApiResult<crate::ingest::IngestReport> {
    let options: IngestOptions = optional_body(&body)?;
    if options.root.is_some() {
        return Err(ApiError::bad_request("`root` cannot be set over HTTP"));
    }
    blocking(engine, move |e| e.ingest(&options)).await
}

async fn latest_report(State(engine): Shared) -> ApiResult<crate::ingest::IngestReport> {
    blocking(engine, |e| e.latest_report()).await
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct StampRunBody {
    now: Option<NaiveDateTime>,
}

async fn run_stamps(State(engine): Shared, body: Bytes) -> ApiResult<crate::stamper::StampBatch> {
    let StampRunBody { now } = optional_body(&body)?;
    blocking(engine, move |e| e.stamp_run(now)).await
}

async fn stamp_proof(
    State(engine): Shared,
    Path(digest): Path<String>,
) -> ApiResult<crate::engine::StampRecord> {
    blocking(engine, move |e| e.stamp_proof(&digest)).await
}

async fn unknown_api() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        body: ErrorBody { code: "not_found".into(), message: "no such endpoint".into() },
    }
}

/// Routes under `/api`, without CORS or static files.
pub fn api_router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/samples", get(list_samples).post(create_sample))
        .route("/api/samples/{name}/history", get(sample_history))
        .route("/api/rules", get(list_rules).post(create_rule))
        .route("/api/entries", get(list_entries))
        .route("/api/entries/{id}", get(get_entry).delete(delete_entry))
        .route("/api/entries/{id}/plot", get(entry_plot))
        .route("/api/entries/{id}/links", get(entry_links))
        .route("/api/links", axum::routing::post(create_link))
        .route("/api/notes", axum::routing::post(create_note))
        .route("/api/ingest", axum::routing::post(run_ingest))
        .route("/api/reports/latest", get(latest_report))
        .route("/api/stamps/run", axum::routing::post(run_stamps))
        .route("/api/stamps/{digest}", get(stamp_proof))
        .route("/api/{*rest}", axum::routing::any(unknown_api))
        .with_state(engine)
}

/// Full application: API, CORS for the configured origin and the web client
/// from `server.ui_dir` under `/`.
pub fn router(engine: Arc<Engine>) -> Result<Router, ServeError> {
    let server = engine.config().server.clone();
    let mut app = api_router(engine);
    if let Some(dir) = server.ui_dir {
        app = app.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true));
    }
    if let Some(origin) = server.cors_origin {
        let value = HeaderValue::from_str(&origin).map_err(|_| ServeError::InvalidOrigin(origin.clone()))?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(value)
                .allow_methods(tower_http::cors::Any)
                .allow_headers(tower_http::cors::Any),
        );
    }
    Ok(app)
}

/// Binds the listening socket, reporting an occupied port as `PortInUse`.
pub async fn bind(bind: &str, port: u16) -> Result<tokio::net::TcpListener, ServeError> {
    let addr = format!("{bind}:{port}");
    tokio::net::TcpListener::bind(&addr).await.map_err(|source| {
        if source.kind() == std::io::ErrorKind::AddrInUse {
            ServeError::PortInUse { addr: addr.clone() }
        } else {
            ServeError::Bind { addr: addr.clone(), source }
        }
    })
}

/// Serves the application on an already bound listener until the future is dropped.
pub async fn serve_on(listener: tokio::net::TcpListener, engine: Arc<Engine>) -> Result<(), ServeError> {
    let app = router(engine)?;
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    tracing::info!(?addr, "serving");
    axum::serve(listener, app).await?;
    Ok(())
}

/// Binds to the configured address and serves.
pub async fn serve(engine: Arc<Engine>) -> Result<(), ServeError> {
    let server = &engine.config().server;
    let listener = bind(&server.bind, server.port).await?;
    serve_on(listener, engine).await
}
