//! HTTP/JSON front end for the design-space exploration pipeline.
//!
//! Routes (all bodies JSON):
//!
//! | method | path              | body              | reply            |
//! |--------|-------------------|-------------------|------------------|
//! | GET    | `/healthz`        |                   | `"ok"`           |
//! | POST   | `/v1/train`       | `TrainRequest`    | `TrainResponse`  |
//! | POST   | `/v1/evaluate`    | `EvaluateRequest` | `EvaluateResponse` |
//! | POST   | `/v1/optimize`    | `OptimizeRequest` | `OptimizeResponse` |
//! | POST   | `/v1/jobs`        | `OptimizeRequest` | `JobCreated`     |
//! | GET    | `/v1/jobs`        |                   | `[JobStatus]` without results |
//! | GET    | `/v1/jobs/{id}`   |                   | `JobStatus`      |
//! | POST   | `/v1/emit`        | `EmitRequest`     | `EmitResponse`   |
//! | POST   | `/v1/report`      | `ReportRequest`   | `Report`         |
//!
//! Failures reply with an `ErrorBody`: 400 for bad input, 404 for unknown
//! jobs, 500 for internal invariant failures.

use std::collections::BTreeMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dtapprox_core::api::{self, ErrorBody, JobCreated, JobState, JobStatus, OptimizeRequest};
use dtapprox_core::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;

/// Request bodies carry whole datasets.
const BODY_LIMIT: usize = 256 * 1024 * 1024;

#[derive(Debug, Default)]
struct Jobs {
    next: u64,
    table: BTreeMap<u64, JobStatus>,
}

#[derive(Debug, Clone, Default)]
pub struct AppState {
    jobs: Arc<Mutex<Jobs>>,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = if e.is_internal() {
            StatusCode::INTERNAL_SERVER_ERROR
        } else {
            StatusCode::BAD_REQUEST
        };
        if e.is_internal() {
            tracing::error!(error = %e, "internal failure");
        }
        ApiError {
            status,
            body: ErrorBody::from(&e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::from(Error::Json(e)))
}

/// Runs a CPU-bound handler off the async workers.
async fn blocking<Req, Resp>(body: Bytes, f: fn(&Req) -> dtapprox_core::Result<Resp>) -> Result<Json<Resp>, ApiError>
where
    Req: DeserializeOwned + Send + 'static,
    Resp: Serialize + Send + 'static,
{
    let req: Req = parse(&body)?;
    tokio::task::spawn_blocking(move || f(&req))
        .await
        .map_err(|e| ApiError::from(Error::Internal(format!("worker panicked: {e}"))))?
        .map(Json)
        .map_err(ApiError::from)
}

async fn healthz() -> &'static str {
    "ok"
}

async fn train(body: Bytes) -> Result<impl IntoResponse, ApiError> {
    blocking(body, api::train).await
}

async fn evaluate(body: Bytes) -> Result<impl IntoResponse, ApiError> {
    blocking(body, api::evaluate).await
}

async fn optimize(body: Bytes) -> Result<impl IntoResponse, ApiError> {
    blocking(body, api::optimize).await
}

async fn emit(body: Bytes) -> Result<impl IntoResponse, ApiError> {
    blocking(body, api::emit).await
}

async fn report(body: Bytes) -> Result<impl IntoResponse, ApiError> {
    blocking(body, api::report).await
}

async fn create_job(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: OptimizeRequest = parse(&body)?;
    req.ga.validate()?;
    let id = {
        let mut jobs = state.jobs.lock().expect("job table lock");
        let id = jobs.next;
        jobs.next += 1;
        jobs.table.insert(
            id,
            JobStatus {
                id,
                state: JobState::Running,
                generation: 0,
                generations: req.ga.generations,
                result: None,
                error: None,
            },
        );
        id
    };
    let table = Arc::clone(&state.jobs);
    tokio::task::spawn_blocking(move || {
        let progress_table = Arc::clone(&table);
        let outcome = api::optimize_with_progress(&req, |g| {
            if let Some(job) = progress_table.lock().expect("job table lock").table.get_mut(&id) {
                job.generation = g;
            }
        });
        let mut jobs = table.lock().expect("job table lock");
        let job = jobs.table.get_mut(&id).expect("job registered");
        match outcome {
            Ok(resp) => {
                job.state = JobState::Done;
                job.result = Some(resp);
            }
            Err(e) => {
                tracing::warn!(job = id, error = %e, "job failed");
                job.state = JobState::Failed;
                job.error = Some(ErrorBody::from(&e));
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(JobCreated { id })))
}

async fn get_job(State(state): State<AppState>, Path(id): Path<u64>) -> Result<Json<JobStatus>, ApiError> {
    let jobs = state.jobs.lock().expect("job table lock");
    jobs.table.get(&id).cloned().map(Json).ok_or_else(|| ApiError {
        status: StatusCode::NOT_FOUND,
        body: ErrorBody {
            kind: "not_found".into(),
            message: format!("no job {id}"),
            internal: false,
        },
    })
}

async fn list_jobs(State(state): State<AppState>) -> Json<Vec<JobStatus>> {
    let jobs = state.jobs.lock().expect("job table lock");
    Json(
        jobs.table
            .values()
            .map(|j| JobStatus {
                result: None,
                ..j.clone()
            })
            .collect(),
    )
}

pub fn router() -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/train", post(train))
        .route("/v1/evaluate", post(evaluate))
        .route("/v1/optimize", post(optimize))
        .route("/v1/jobs", post(create_job).get(list_jobs))
        .route("/v1/jobs/{id}", get(get_job))
        .route("/v1/emit", post(emit))
        .route("/v1/report", post(report))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(AppState::default())
}

/// Serves until `shutdown` resolves.
pub async fn serve<F>(listener: TcpListener, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router()).with_graceful_shutdown(shutdown).await
}

/// Binds `addr` and serves in the background. Returns the bound address,
/// which differs from `addr` when port 0 was requested.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let handle = tokio::spawn(async move { axum::serve(listener, router()).await });
    Ok((local, handle))
}
