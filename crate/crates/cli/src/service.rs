//! HTTP service: pipeline runs plus the annotation workbench API.
//!
//! Runs are keyed by run id, so submitting the same post twice under the
//! same config and cutoff returns the stored record.

use std::collections::HashSet;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;
use veracity_core::domain::validate_post;
use veracity_core::orchestrator::IndexEntry;
use veracity_core::{GatePolicy, Pipeline, RawPost, RunStore};
use veracity_eval::workbench::{Submission, Workbench, WorkbenchError};

pub struct AppState {
    pipeline: Arc<Pipeline>,
    store: RunStore,
    policy: GatePolicy,
    pending: Mutex<HashSet<String>>,
    workbench: Option<Arc<Workbench>>,
    metrics: Metrics,
}

#[derive(Default)]
struct Metrics {
    cache_hits: AtomicU64,
    runs_started: AtomicU64,
    runs_stored: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub cache_hits: u64,
    pub runs_started: u64,
    pub runs_stored: u64,
}

impl AppState {
    pub fn new(pipeline: Arc<Pipeline>, store: RunStore, policy: GatePolicy) -> Self {
        Self {
            pipeline,
            store,
            policy,
            pending: Mutex::new(HashSet::new()),
            workbench: None,
            metrics: Metrics::default(),
        }
    }

    pub fn with_workbench(mut self, workbench: Arc<Workbench>) -> Self {
        self.workbench = Some(workbench);
        self
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        MetricsSnapshot {
            cache_hits: self.metrics.cache_hits.load(Ordering::Relaxed),
            runs_started: self.metrics.runs_started.load(Ordering::Relaxed),
            runs_stored: self.metrics.runs_stored.load(Ordering::Relaxed),
        }
    }
}

/// Builds the router. `assets` is the annotation UI bundle, served for any
/// path outside `/api`.
pub fn router(state: Arc<AppState>, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/runs", post(submit_run).get(list_runs))
        .route("/api/runs/:id", get(run_status))
        .route("/api/runs/:id/record", get(run_record))
        .route("/api/metrics", get(metrics))
        .route("/api/annotation/next", get(next_task))
        .route("/api/annotation/tasks/:id", get(task_view))
        .route("/api/annotation/submissions", post(submit_annotation))
        .with_state(state);
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(json!({"error": code, "message": message.into()}))).into_response()
}

#[derive(Debug, Deserialize)]
pub struct SubmitRun {
    pub post: RawPost,
    /// Overrides the service's cutoff policy for this run.
    #[serde(default)]
    pub cutoff: Option<String>,
}

async fn submit_run(State(state): State<Arc<AppState>>, Json(body): Json<SubmitRun>) -> Response {
    let policy = match body.cutoff.as_deref().map(GatePolicy::from_str).transpose() {
        Ok(p) => p.unwrap_or_else(|| state.policy.clone()),
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, "invalid_cutoff", e.to_string()),
    };
    let gateway = state.pipeline.gateway();
    let post = match validate_post(body.post, gateway.image_source(), gateway.images()).await {
        Ok(p) => p,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, "invalid_post", e.to_string()),
    };
    let run_id = state.pipeline.run_id_for(&post, &policy);
    match state.store.get(&run_id) {
        Ok(Some(record)) => {
            state.metrics.cache_hits.fetch_add(1, Ordering::Relaxed);
            return (
                StatusCode::OK,
                Json(json!({"run_id": run_id, "status": record.status, "cached": true, "record": record})),
            )
                .into_response();
        }
        Ok(None) => {}
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, "store", e.to_string()),
    }
    let fresh = state.pending.lock().expect("pending lock").insert(run_id.clone());
    if fresh {
        state.metrics.runs_started.fetch_add(1, Ordering::Relaxed);
        let state = state.clone();
        let id = run_id.clone();
        tokio::spawn(async move {
            let record = state.pipeline.run(&post, &policy).await;
            match state.store.put(&record) {
                Ok(_) => {
                    state.metrics.runs_stored.fetch_add(1, Ordering::Relaxed);
                }
                Err(e) => tracing::error!(run_id = %id, "storing run failed: {e}"),
            }
            state.pending.lock().expect("pending lock").remove(&id);
        });
    }
    (
        StatusCode::ACCEPTED,
        Json(json!({"run_id": run_id, "status": "pending", "cached": false})),
    )
        .into_response()
}

async fn list_runs(State(state): State<Arc<AppState>>) -> Response {
    match state.store.list() {
        Ok(entries) => Json::<Vec<IndexEntry>>(entries).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "store", e.to_string()),
    }
}

async fn run_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.store.get(&id) {
        Ok(Some(record)) => Json(json!({"run_id": id, "status": record.status})).into_response(),
        Ok(None) if state.pending.lock().expect("pending lock").contains(&id) => {
            Json(json!({"run_id": id, "status": "pending"})).into_response()
        }
        Ok(None) => error(StatusCode::NOT_FOUND, "not_found", format!("no run {id}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "store", e.to_string()),
    }
}

async fn run_record(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.store.get(&id) {
        Ok(Some(record)) => Json(record).into_response(),
        Ok(None) if state.pending.lock().expect("pending lock").contains(&id) => (
            StatusCode::ACCEPTED,
            Json(json!({"run_id": id, "status": "pending"})),
        )
            .into_response(),
        Ok(None) => error(StatusCode::NOT_FOUND, "not_found", format!("no run {id}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "store", e.to_string()),
    }
}

async fn metrics(State(state): State<Arc<AppState>>) -> Json<MetricsSnapshot> {
    Json(state.metrics())
}

/// Resolves the bearer token to an annotator id.
fn annotator(state: &AppState, headers: &HeaderMap) -> Result<(Arc<Workbench>, String), Response> {
    let Some(workbench) = state.workbench.clone() else {
        return Err(error(StatusCode::SERVICE_UNAVAILABLE, "annotation_disabled", "no task set loaded"));
    };
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim);
    let Some(id) = token.and_then(|t| workbench.authenticate(t)).map(str::to_string) else {
        return Err(error(StatusCode::UNAUTHORIZED, "unauthorized", "missing or unknown bearer token"));
    };
    Ok((workbench, id))
}

fn workbench_error(e: WorkbenchError) -> Response {
    let status = match &e {
        WorkbenchError::NoTasksRemaining => StatusCode::NOT_FOUND,
        WorkbenchError::NotAssigned(_) => StatusCode::FORBIDDEN,
        WorkbenchError::UnknownResponse { .. } => StatusCode::NOT_FOUND,
        WorkbenchError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
        WorkbenchError::Conflict => StatusCode::CONFLICT,
        WorkbenchError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
    };
    let code = match &e {
        WorkbenchError::NoTasksRemaining => "no_tasks_remaining",
        WorkbenchError::NotAssigned(_) => "not_assigned",
        WorkbenchError::UnknownResponse { .. } => "unknown_response",
        WorkbenchError::Validation(_) => "validation",
        WorkbenchError::Conflict => "conflict",
        WorkbenchError::Store(_) => "store",
    };
    error(status, code, e.to_string())
}

async fn next_task(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Response {
    let (workbench, id) = match annotator(&state, &headers) {
        Ok(a) => a,
        Err(r) => return r,
    };
    match workbench.next_task(&id) {
        Ok(view) => Json(view).into_response(),
        Err(e) => workbench_error(e),
    }
}

async fn task_view(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(task): Path<String>) -> Response {
    let (workbench, id) = match annotator(&state, &headers) {
        Ok(a) => a,
        Err(r) => return r,
    };
    match workbench.view(&id, &task) {
        Ok(view) => Json(view).into_response(),
        Err(e) => workbench_error(e),
    }
}

/// Acknowledgement of a stored annotation. Carries the blinded response id,
/// never the stored one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionReceipt {
    pub task_id: String,
    pub response_id: String,
    pub submitted_at: chrono::DateTime<chrono::Utc>,
}

async fn submit_annotation(State(state): State<Arc<AppState>>, headers: HeaderMap, body: axum::body::Bytes) -> Response {
    let (workbench, id) = match annotator(&state, &headers) {
        Ok(a) => a,
        Err(r) => return r,
    };
    // Parsed by hand so malformed rubrics share the 422 error shape.
    let submission: Submission = match serde_json::from_slice::<Value>(&body).and_then(serde_json::from_value) {
        Ok(s) => s,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, "validation", e.to_string()),
    };
    let blinded = submission.response_id.clone();
    match workbench.submit(&id, submission) {
        Ok(record) => (
            StatusCode::CREATED,
            Json(SubmissionReceipt {
                task_id: record.task_id,
                response_id: blinded,
                submitted_at: record.submitted_at,
            }),
        )
            .into_response(),
        Err(e) => workbench_error(e),
    }
}
