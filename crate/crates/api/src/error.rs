use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use physrisk_core::Error;
use serde_json::json;

/// Error response: status plus a JSON body `{"error": ..., "status": ...}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownKey { .. } => StatusCode::NOT_FOUND,
            Error::MissingVariable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Invalid(_)
            | Error::Parse { .. }
            | Error::OutOfRange { .. }
            | Error::UnknownVariant { .. }
            | Error::GridMismatch { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message, "status": self.status.as_u16() }))).into_response()
    }
}
