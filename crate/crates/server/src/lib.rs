//! HTTP API over [`AlertServer`].
//!
//! | method | path                   | body / query                      |
//! |--------|------------------------|-----------------------------------|
//! | POST   | /reports               | `SubmitRequest`                   |
//! | GET    | /reports               | `ListQuery`                       |
//! | GET    | /reports/{id}          |                                   |
//! | POST   | /reports/{id}/actions  | `ActionRequest`                   |
//! | POST   | /reports/{id}/verify   | `VerifyRequest`                   |
//! | GET    | /reports/{id}/score    | `?threshold=`                     |
//! | GET    | /reports/{id}/cap      | `?sender=`                        |
//! | POST   | /cap                   | CAP XML, `Idempotency-Key` header |
//! | POST   | /subscriptions         | `SubscribeRequest`                |
//! | POST   | /poll                  | `PollRequest`                     |
//! | GET    | /actors, /actors/{id}  |                                   |
//! | GET    | /audit                 | `?since=`                         |

use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use disaster_core::cap::CapError;
use disaster_core::domain::ActorId;
use disaster_core::server::api::{
    ActionRequest, ErrorBody, ListQuery, PollRequest, PollResponse, ScoreResponse, SubmitRequest, SubmitResponse,
    SubscribeRequest, VerifyRequest, MAX_POLL_TIMEOUT_MS,
};
use disaster_core::server::{AlertServer, ServerError};

pub struct ApiError(ServerError);

impl From<ServerError> for ApiError {
    fn from(e: ServerError) -> Self {
        Self(e)
    }
}

pub fn status_for(e: &ServerError) -> StatusCode {
    match e {
        ServerError::ValidationFailed(_) | ServerError::UnknownRegion(_) => StatusCode::UNPROCESSABLE_ENTITY,
        ServerError::UnknownReport(_) | ServerError::UnknownActor(_) | ServerError::UnknownSubscriber(_) => {
            StatusCode::NOT_FOUND
        }
        ServerError::Forbidden { .. } => StatusCode::FORBIDDEN,
        ServerError::IllegalTransition(_)
        | ServerError::MergeCycle { .. }
        | ServerError::DuplicateVerification(_)
        | ServerError::ReportClosed(_)
        | ServerError::CursorAhead { .. } => StatusCode::CONFLICT,
        ServerError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
        ServerError::Cap(CapError::MalformedXml(_) | CapError::SchemaViolation { .. }) => StatusCode::BAD_REQUEST,
        ServerError::Cap(_) => StatusCode::UNPROCESSABLE_ENTITY,
        ServerError::CorruptLog { .. } | ServerError::Config(_) | ServerError::Io(_) => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let violations = match &self.0 {
            ServerError::ValidationFailed(v) => v.iter().map(ToString::to_string).collect(),
            _ => Vec::new(),
        };
        let body = ErrorBody {
            error: self.0.code().to_string(),
            message: self.0.to_string(),
            violations,
        };
        (status_for(&self.0), Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs a blocking server call off the async workers.
async fn blocking<T, F>(server: &Arc<AlertServer>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&AlertServer) -> Result<T, ServerError> + Send + 'static,
{
    let server = Arc::clone(server);
    tokio::task::spawn_blocking(move || f(&server))
        .await
        .unwrap_or_else(|e| Err(ServerError::Io(std::io::Error::other(e))))
        .map_err(ApiError)
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(ServerError::InvalidRequest(message.into()))
}

pub fn router(server: Arc<AlertServer>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/reports", post(submit).get(list))
        .route("/reports/{id}", get(view))
        .route("/reports/{id}/actions", post(act))
        .route("/reports/{id}/verify", post(verify))
        .route("/reports/{id}/score", get(score))
        .route("/reports/{id}/cap", get(export_cap))
        .route("/cap", post(import_cap))
        .route("/subscriptions", post(subscribe))
        .route("/poll", post(poll))
        .route("/actors", get(actors))
        .route("/actors/{id}", get(actor))
        .route("/audit", get(audit))
        .with_state(server)
}

async fn submit(State(s): State<Arc<AlertServer>>, Json(req): Json<SubmitRequest>) -> ApiResult<Response> {
    let id = blocking(&s, move |s| s.submit_report(req.report, req.idempotency_key.as_deref())).await?;
    Ok((StatusCode::CREATED, Json(SubmitResponse { id })).into_response())
}

async fn list(State(s): State<Arc<AlertServer>>, Query(q): Query<ListQuery>) -> ApiResult<Response> {
    let filter = q.to_filter().map_err(bad_request)?;
    let reports = blocking(&s, move |s| Ok(s.list_reports(&filter))).await?;
    Ok(Json(reports).into_response())
}

async fn view(State(s): State<Arc<AlertServer>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&s, move |s| s.report_view(&id)).await?).into_response())
}

async fn act(
    State(s): State<Arc<AlertServer>>,
    Path(id): Path<String>,
    Json(req): Json<ActionRequest>,
) -> ApiResult<Response> {
    let report = blocking(&s, move |s| s.process_report(&id, &req.actor, req.action)).await?;
    Ok(Json(report).into_response())
}

async fn verify(
    State(s): State<Arc<AlertServer>>,
    Path(id): Path<String>,
    Json(req): Json<VerifyRequest>,
) -> ApiResult<Response> {
    let record = blocking(&s, move |s| s.verify(&id, &req.verifier, &req.note)).await?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

#[derive(Deserialize)]
struct ScoreQuery {
    threshold: Option<f64>,
}

async fn score(
    State(s): State<Arc<AlertServer>>,
    Path(id): Path<String>,
    Query(q): Query<ScoreQuery>,
) -> ApiResult<Response> {
    let response = blocking(&s, move |s| {
        let threshold = q.threshold.unwrap_or(s.settings().auto_threshold);
        Ok(ScoreResponse {
            reliability: s.reliability_score(&id)?,
            threshold,
            auto_distribution_eligible: s.auto_distribution_eligible(&id, Some(threshold))?,
        })
    })
    .await?;
    Ok(Json(response).into_response())
}

#[derive(Deserialize)]
struct SenderQuery {
    sender: Option<String>,
}

async fn export_cap(
    State(s): State<Arc<AlertServer>>,
    Path(id): Path<String>,
    Query(q): Query<SenderQuery>,
) -> ApiResult<Response> {
    let sender = q.sender.map(ActorId::new);
    let xml = s.export_cap(&id, sender.as_ref())?;
    Ok(([(header::CONTENT_TYPE, "application/xml")], xml).into_response())
}

async fn import_cap(State(s): State<Arc<AlertServer>>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let key = match headers.get("idempotency-key") {
        Some(v) => Some(
            v.to_str()
                .map_err(|_| bad_request("Idempotency-Key must be visible ASCII"))?
                .to_string(),
        ),
        None => None,
    };
    let id = blocking(&s, move |s| s.import_cap(&body, key.as_deref())).await?;
    Ok((StatusCode::CREATED, Json(SubmitResponse { id })).into_response())
}

async fn subscribe(State(s): State<Arc<AlertServer>>, Json(req): Json<SubscribeRequest>) -> ApiResult<Response> {
    Ok(Json(blocking(&s, move |s| s.subscribe(req.subscriber, req.topics)).await?).into_response())
}

async fn poll(State(s): State<Arc<AlertServer>>, Json(req): Json<PollRequest>) -> ApiResult<Response> {
    if req.timeout_ms > MAX_POLL_TIMEOUT_MS {
        return Err(bad_request(format!("timeout_ms above {MAX_POLL_TIMEOUT_MS}")));
    }
    let messages = blocking(&s, move |s| {
        s.poll(&req.subscriber, &req.cursors, Duration::from_millis(req.timeout_ms))
    })
    .await?;
    Ok(Json(PollResponse { messages }).into_response())
}

async fn actors(State(s): State<Arc<AlertServer>>) -> Response {
    Json(s.directory().actors().to_vec()).into_response()
}

async fn actor(State(s): State<Arc<AlertServer>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(s.actor(&ActorId::new(id))?).into_response())
}

#[derive(Deserialize)]
struct AuditQuery {
    #[serde(default)]
    since: u64,
}

async fn audit(State(s): State<Arc<AlertServer>>, Query(q): Query<AuditQuery>) -> Response {
    let events: Vec<_> = s.events().into_iter().filter(|e| e.seq > q.since).collect();
    Json(events).into_response()
}
