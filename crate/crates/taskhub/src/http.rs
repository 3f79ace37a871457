//! HTTP front end.
//!
//! | method | path                      | response                               |
//! |--------|---------------------------|----------------------------------------|
//! | GET    | `/tasks`                  | JSON task list                         |
//! | POST   | `/tasks/{id}/join`        | `{"contributor": token}`               |
//! | GET    | `/tasks/{id}/next`        | raw payload body, or 204 when done     |
//! | POST   | `/tasks/{id}/annotations` | `{"status": "recorded" \| "duplicate"}` |
//! | GET    | `/export`                 | line-delimited records                 |
//!
//! The `next` body is exactly the payload (text, JSON token list, numeric
//! CSV matrix or PNG); item id, kind and progress travel in headers.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::error::HubError;
use crate::hub::{Ack, NextItem, TaskHub};

pub const ITEM_ID_HEADER: &str = "x-item-id";
pub const PAYLOAD_KIND_HEADER: &str = "x-payload-kind";
pub const ANSWERED_HEADER: &str = "x-progress-answered";
pub const TOTAL_HEADER: &str = "x-progress-total";

impl IntoResponse for HubError {
    fn into_response(self) -> Response {
        let status = match &self {
            HubError::NotFound { .. } => StatusCode::NOT_FOUND,
            HubError::Exclusivity { .. } | HubError::Conflict(_) => StatusCode::CONFLICT,
            HubError::Validation(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": self.kind(), "message": self.to_string() });
        if let HubError::Exclusivity { joined_task, .. } = &self {
            body["joined_task"] = json!(joined_task);
        }
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    contributor: String,
}

#[derive(Debug, Deserialize)]
struct Submission {
    contributor: String,
    item_id: String,
    answer: String,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    task: Option<String>,
}

pub fn router(hub: Arc<TaskHub>) -> Router {
    Router::new()
        .route("/tasks", get(list_tasks))
        .route("/tasks/{id}/join", post(join))
        .route("/tasks/{id}/next", get(next))
        .route("/tasks/{id}/annotations", post(submit))
        .route("/export", get(export))
        .with_state(hub)
}

async fn list_tasks(State(hub): State<Arc<TaskHub>>) -> impl IntoResponse {
    Json(hub.tasks())
}

async fn join(State(hub): State<Arc<TaskHub>>, Path(id): Path<String>) -> Result<Response, HubError> {
    let token = hub.join(&id)?;
    Ok((StatusCode::CREATED, Json(json!({ "contributor": token, "task_id": id }))).into_response())
}

fn header_value(v: impl ToString) -> HeaderValue {
    HeaderValue::from_str(&v.to_string()).unwrap_or_else(|_| HeaderValue::from_static(""))
}

async fn next(
    State(hub): State<Arc<TaskHub>>,
    Path(id): Path<String>,
    Query(q): Query<NextQuery>,
) -> Result<Response, HubError> {
    match hub.next_item(&id, &q.contributor)? {
        NextItem::Done => Ok(StatusCode::NO_CONTENT.into_response()),
        NextItem::Item(item) => {
            let headers = [
                (header::CONTENT_TYPE, header_value(&item.content_type)),
                (HeaderName::from_static(ITEM_ID_HEADER), header_value(&item.item_id)),
                (HeaderName::from_static(PAYLOAD_KIND_HEADER), header_value(item.kind)),
                (HeaderName::from_static(ANSWERED_HEADER), header_value(item.progress.answered)),
                (HeaderName::from_static(TOTAL_HEADER), header_value(item.progress.total)),
            ];
            Ok((headers, item.body).into_response())
        }
    }
}

async fn submit(
    State(hub): State<Arc<TaskHub>>,
    Path(id): Path<String>,
    Json(s): Json<Submission>,
) -> Result<Response, HubError> {
    let ack = hub.submit_annotation(&id, &s.contributor, &s.item_id, &s.answer)?;
    let status = match ack {
        Ack::Recorded => StatusCode::CREATED,
        Ack::Duplicate => StatusCode::OK,
    };
    Ok((status, Json(json!({ "status": ack }))).into_response())
}

async fn export(State(hub): State<Arc<TaskHub>>, Query(q): Query<ExportQuery>) -> Result<Response, HubError> {
    let mut body = Vec::new();
    hub.write_export(q.task.as_deref(), &mut body)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}
