//! Embedded HTTP service.
//!
//! Holds one model snapshot behind a lock; uploads swap the snapshot and
//! running requests keep the one they started with.
//!
//! ```text
//! GET  /api/model        summary of the loaded model
//! POST /api/model        upload a model document (or {"file": name} from the model directory)
//! POST /api/covary       {"vary": {...}, "scheme": ...}
//! POST /api/prob         {"event": ..., "vary": {...}}
//! POST /api/sensitivity  {"vary": [...], "event": ..., "schemes": [...], "grid": m}
//! POST /api/divergence   {"metrics": [...], "theta_b": [...] | "vary": {...}}
//! POST /api/classify     {"vary": {...}, "samples": n, "seed": s, "oracle": bool, "grid": m}
//! POST /api/project      {"vary": {...}, "grid": m}
//! ```

use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{AppError, ErrorClass, Result};
use crate::formats::{load_model, parse_model};
use crate::ops::{self, Context};
use crate::session::Session;

pub struct AppState {
    model: RwLock<Option<Arc<Session>>>,
    ctx: Context,
    model_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(ctx: Context, session: Option<Session>, model_dir: Option<PathBuf>) -> Self {
        AppState { model: RwLock::new(session.map(Arc::new)), ctx, model_dir }
    }

    /// The current snapshot.
    pub fn snapshot(&self) -> Result<Arc<Session>> {
        let guard = self.model.read().unwrap_or_else(|e| e.into_inner());
        guard.clone().ok_or_else(AppError::no_model)
    }

    fn replace(&self, session: Session) -> Arc<Session> {
        let session = Arc::new(session);
        *self.model.write().unwrap_or_else(|e| e.into_inner()) = Some(session.clone());
        session
    }

    fn load_named(&self, file: &str) -> Result<Session> {
        let dir = self.model_dir.as_deref().ok_or_else(|| {
            AppError::invalid("NoModelDirectory", "the service was started without a model directory")
        })?;
        let name = Path::new(file);
        if name.components().count() != 1 || name.file_name().is_none() {
            return Err(AppError::invalid("InvalidFileName", format!("`{file}` is not a plain file name")));
        }
        load_model(&dir.join(name))
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.class.status()).unwrap_or(StatusCode::BAD_REQUEST);
        let body = json!({ "error": { "code": self.code, "message": self.message, "class": self.class } });
        (status, Json(body)).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T> {
    Ok(serde_json::from_slice(body)?)
}

/// Runs a computation off the async workers.
async fn compute<T, F>(f: F) -> Result<Json<T>>
where
    T: Serialize + Send + 'static,
    F: FnOnce() -> Result<T> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map(Json),
        Err(e) => Err(AppError::new(ErrorClass::Invalid, "Internal", e.to_string())),
    }
}

async fn get_model(State(state): State<Arc<AppState>>) -> Result<Json<ops::ModelSummary>> {
    Ok(Json(ops::summary(&*state.snapshot()?, &state.ctx)))
}

async fn post_model(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<ops::ModelSummary>> {
    let value: Value = parse_body(&body)?;
    let session = match value.get("file").and_then(Value::as_str) {
        Some(file) if value.as_object().is_some_and(|o| o.len() == 1) => state.load_named(file)?,
        _ => parse_model(&value)?,
    };
    let report = session.model().validate(session.theta());
    if let Some(v) = report.violations.first() {
        return Err(AppError::invalid("InvalidModel", v.to_string()));
    }
    Ok(Json(ops::summary(&state.replace(session), &state.ctx)))
}

type Op<Req, Resp> = fn(&Session, &Req, &Context) -> Result<Resp>;

/// Parses the body, takes the current snapshot and runs `op` on a blocking
/// thread.
async fn run<Req, Resp>(state: Arc<AppState>, body: Bytes, op: Op<Req, Resp>) -> Response
where
    Req: DeserializeOwned + Send + 'static,
    Resp: Serialize + Send + 'static,
{
    let prepared = parse_body::<Req>(&body).and_then(|req| Ok((req, state.snapshot()?)));
    let (req, session) = match prepared {
        Ok(p) => p,
        Err(e) => return e.into_response(),
    };
    compute(move || op(&session, &req, &state.ctx)).await.into_response()
}

async fn post_covary(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    run(state, body, |s, r, _| ops::covary(s, r)).await
}

async fn post_prob(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    run(state, body, |s, r, _| ops::prob(s, r)).await
}

async fn post_sensitivity(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    run(state, body, ops::sensitivity).await
}

async fn post_divergence(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    run(state, body, ops::divergence).await
}

async fn post_classify(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    run(state, body, ops::analyze).await
}

async fn post_project(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    run(state, body, ops::project).await
}

async fn fallback() -> AppError {
    AppError::new(ErrorClass::NotFound, "NoSuchEndpoint", "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/model", get(get_model).post(post_model))
        .route("/api/covary", post(post_covary))
        .route("/api/prob", post(post_prob))
        .route("/api/sensitivity", post(post_sensitivity))
        .route("/api/divergence", post(post_divergence))
        .route("/api/classify", post(post_classify))
        .route("/api/project", post(post_project))
        .fallback(fallback)
        .with_state(state)
}

/// Binds `127.0.0.1:port` and serves until the process ends.
pub async fn serve(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
