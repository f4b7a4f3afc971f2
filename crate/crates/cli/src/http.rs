//! HTTP routes over a shared [`Registry`].
//!
//! | method | path                                 | success |
//! |--------|--------------------------------------|---------|
//! | POST   | `/datasets`                          | 201     |
//! | POST   | `/datasets/{id}/collections`         | 201     |
//! | POST   | `/collections/{id}/query`            | 200     |
//! | GET    | `/collections/{id}/plots/{spec_id}`  | 200     |
//!
//! Every failure body is an [`ApiError`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, PathRejection};
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;

use scatterquery_core::service::{ApiError, CollectionRequest, QueryRequest, Registry};

pub struct HttpError(pub ApiError);

impl From<ApiError> for HttpError {
    fn from(e: ApiError) -> Self {
        Self(e)
    }
}

impl IntoResponse for HttpError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0)).into_response()
    }
}

type HttpResult<T> = Result<T, HttpError>;

fn body(b: Result<Bytes, BytesRejection>) -> Result<Bytes, ApiError> {
    b.map_err(|r| {
        let code = if r.status() == StatusCode::PAYLOAD_TOO_LARGE {
            "capacity-exceeded"
        } else {
            "invalid-request"
        };
        ApiError::new(code, r.body_text())
    })
}

fn path<T>(p: Result<Path<T>, PathRejection>) -> Result<T, ApiError> {
    p.map(|Path(v)| v)
        .map_err(|r| ApiError::new("invalid-request", r.body_text()))
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        let code = if e.is_data() {
            "invalid-request"
        } else {
            "invalid-json"
        };
        ApiError::new(code, e.to_string())
    })
}

/// Runs CPU-bound registry work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new("internal", e.to_string()))?
}

fn created<T: Serialize>(body: T) -> Response {
    (StatusCode::CREATED, Json(body)).into_response()
}

async fn upload_dataset(
    State(reg): State<Arc<Registry>>,
    raw: Result<Bytes, BytesRejection>,
) -> HttpResult<Response> {
    let body = body(raw)?;
    let out = blocking(move || reg.upload_dataset(&body)).await?;
    Ok(created(out))
}

async fn create_collection(
    State(reg): State<Arc<Registry>>,
    id: Result<Path<String>, PathRejection>,
    raw: Result<Bytes, BytesRejection>,
) -> HttpResult<Response> {
    let dataset_id = path(id)?;
    let req: CollectionRequest = parse_body(&body(raw)?)?;
    let out = blocking(move || reg.create_collection(&dataset_id, &req)).await?;
    Ok(created(out))
}

async fn query(
    State(reg): State<Arc<Registry>>,
    id: Result<Path<String>, PathRejection>,
    raw: Result<Bytes, BytesRejection>,
) -> HttpResult<Response> {
    let collection_id = path(id)?;
    let req: QueryRequest = parse_body(&body(raw)?)?;
    let out = blocking(move || reg.query(&collection_id, &req)).await?;
    Ok(Json(out).into_response())
}

async fn plot(
    State(reg): State<Arc<Registry>>,
    ids: Result<Path<(String, String)>, PathRejection>,
) -> HttpResult<Response> {
    let (collection_id, spec_id) = path(ids)?;
    let out = blocking(move || reg.plot(&collection_id, &spec_id)).await?;
    Ok(Json(out).into_response())
}

async fn no_route() -> HttpError {
    HttpError(ApiError::new("not-found", "no such route"))
}

async fn wrong_method() -> Response {
    let err = ApiError::new("method-not-allowed", "method not allowed on this route");
    (StatusCode::METHOD_NOT_ALLOWED, Json(err)).into_response()
}

pub fn router(registry: Arc<Registry>) -> Router {
    let limit = registry.config().max_upload_bytes;
    Router::new()
        .route("/datasets", post(upload_dataset))
        .route("/datasets/{id}/collections", post(create_collection))
        .route("/collections/{id}/query", post(query))
        .route("/collections/{id}/plots/{spec_id}", get(plot))
        .fallback(no_route)
        .method_not_allowed_fallback(wrong_method)
        .layer(DefaultBodyLimit::max(limit))
        .with_state(registry)
}
