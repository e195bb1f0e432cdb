//! JSON-over-HTTP routes.

use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gridauth_core::protocol::{
    ClickRequest, ClickResponse, ErrorBody, RegisterRequest, RegisterResponse, SessionCreated, SessionRequest,
    SessionView,
};
use tokio::net::TcpListener;

use crate::engine::{AuthService, ServiceError};

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self(ServiceError::BadRequest(e.body_text()))
    }
}

pub fn status_for(e: &ServiceError) -> StatusCode {
    match e {
        ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
        ServiceError::Conflict(_) => StatusCode::CONFLICT,
        ServiceError::NotFound => StatusCode::NOT_FOUND,
        ServiceError::Expired => StatusCode::GONE,
        ServiceError::Locked { .. } => StatusCode::LOCKED,
        ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_for(&self.0);
        let (error, retry_after_seconds) = match &self.0 {
            ServiceError::Locked { retry_after_secs } => (self.0.to_string(), Some(*retry_after_secs)),
            ServiceError::Internal(detail) => {
                tracing::error!("request failed: {detail}");
                ("internal error".to_owned(), None)
            }
            other => (other.to_string(), None),
        };
        let mut res = (status, Json(ErrorBody { error, retry_after_seconds })).into_response();
        if let Some(secs) = retry_after_seconds {
            res.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from(secs));
        }
        res
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T, F>(service: Arc<AuthService>, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&AuthService) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service)).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn register(
    State(service): State<Arc<AuthService>>,
    body: Result<Json<RegisterRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<RegisterResponse>)> {
    let Json(req) = body?;
    let key = blocking(service, move |s| s.register(&req.username)).await?;
    Ok((StatusCode::CREATED, Json(RegisterResponse { key })))
}

async fn create_session(
    State(service): State<Arc<AuthService>>,
    body: Result<Json<SessionRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionCreated>)> {
    let Json(req) = body?;
    let created = blocking(service, move |s| s.start_session(&req.username)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn click(
    State(service): State<Arc<AuthService>>,
    Path(id): Path<String>,
    body: Result<Json<ClickRequest>, JsonRejection>,
) -> ApiResult<Json<ClickResponse>> {
    let Json(req) = body?;
    let reply = blocking(service, move |s| s.click(&id, req.row, req.col)).await?;
    Ok(Json(reply))
}

async fn get_session(State(service): State<Arc<AuthService>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    Ok(Json(service.session_view(&id)?))
}

pub fn router(service: Arc<AuthService>) -> Router {
    Router::new()
        .route("/api/v1/register", post(register))
        .route("/api/v1/sessions", post(create_session))
        .route("/api/v1/sessions/{id}", get(get_session))
        .route("/api/v1/sessions/{id}/clicks", post(click))
        .with_state(service)
}

/// Serves until `shutdown` resolves, lets in-flight requests finish, then
/// flushes the account store.
pub async fn serve(
    listener: TcpListener,
    service: Arc<AuthService>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(service.clone());
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    service.store().flush().map_err(std::io::Error::other)?;
    Ok(())
}
