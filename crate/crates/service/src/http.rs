//! HTTP routes used by the annotation frontends.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use crate::error::ServiceError;
use crate::event::{EventBatch, Submission};
use crate::store::Store;

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownAssignment(_) => StatusCode::NOT_FOUND,
            ServiceError::ClosedAssignment(_)
            | ServiceError::PageAlreadySubmitted(_)
            | ServiceError::NoSubmittedPages(_)
            | ServiceError::InvalidTransition { .. }
            | ServiceError::DuplicateAssignment(_) => StatusCode::CONFLICT,
            ServiceError::NonMonotoneTimestamp { .. } | ServiceError::InvariantViolation(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::InvalidPage { .. } | ServiceError::InvalidEvent { .. } | ServiceError::InvalidAssignmentId(_) => {
                StatusCode::BAD_REQUEST
            }
            ServiceError::WorkerMismatch => StatusCode::FORBIDDEN,
            ServiceError::Corrupt { .. } | ServiceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.kind(), "message": self.to_string() }))).into_response()
    }
}

type Shared = State<Arc<Store>>;

async fn page(State(store): Shared, Path((id, n)): Path<(String, u32)>) -> Result<Response, ServiceError> {
    Ok(Json(store.page(&id, n)?).into_response())
}

async fn events(State(store): Shared, Path(id): Path<String>, Json(batch): Json<EventBatch>) -> Result<Response, ServiceError> {
    Ok(Json(store.ingest(&id, &batch)?).into_response())
}

async fn submit(
    State(store): Shared,
    Path((id, n)): Path<(String, u32)>,
    Json(sub): Json<Submission>,
) -> Result<Response, ServiceError> {
    let records = store.submit(&id, n, &sub)?;
    let records: Vec<Value> =
        records.iter().map(|r| serde_json::from_str(r).expect("records are JSON")).collect();
    Ok(Json(json!({ "page_idx": n, "records": records })).into_response())
}

async fn code(State(store): Shared, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let code = store.issue_code(&id)?;
    Ok(Json(json!({ "assignment_id": id, "code": code })).into_response())
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/hit/{id}/page/{n}", get(page))
        .route("/hit/{id}/events", post(events))
        .route("/hit/{id}/page/{n}/submit", post(submit))
        .route("/hit/{id}/code", get(code))
        .with_state(store)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, store: Arc<Store>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store)).await
}
