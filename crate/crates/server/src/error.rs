use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use neuronhub_core::search::QueryError;
use neuronhub_core::store::NotFound;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    pub error: &'static str,
    pub message: String,
    pub status: u16,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            error,
            message: message.into(),
            status: status.as_u16(),
        }
    }

    pub fn invalid_index(what: &str, raw: &str) -> Self {
        Self::new(
            StatusCode::BAD_REQUEST,
            "invalid-index",
            format!("{what} index {raw:?} is not a non-negative integer"),
        )
    }

    pub fn malformed_query(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed-query", message)
    }

    pub fn unknown_service(raw: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown-service", format!("unknown service {raw:?}"))
    }

    pub fn no_route(path: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "no-route", format!("no route for {path}"))
    }
}

impl From<NotFound> for ApiError {
    fn from(e: NotFound) -> Self {
        let (status, code) = match &e {
            NotFound::UnknownModel(_) => (StatusCode::NOT_FOUND, "unknown-model"),
            NotFound::ServiceUnavailable { .. } => (StatusCode::SERVICE_UNAVAILABLE, "service-unavailable"),
            NotFound::OutOfRange(_) => (StatusCode::NOT_FOUND, "out-of-range"),
            NotFound::RecordAbsent { .. } => (StatusCode::NOT_FOUND, "record-absent"),
            NotFound::VirtualService => (StatusCode::NOT_FOUND, "unknown-service"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        Self::malformed_query(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, axum::Json(self)).into_response()
    }
}
