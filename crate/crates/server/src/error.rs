use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApiError {
    #[error("invalid config at {field}: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("capacity exceeded: at most {max} live sessions")]
    CapacityExceeded { max: usize },
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} already has a commander")]
    CommanderConflict(String),
    #[error("{0}")]
    BadRequest(String),
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::InvalidConfig { .. } => "invalid-config",
            ApiError::CapacityExceeded { .. } => "capacity-exceeded",
            ApiError::UnknownSession(_) => "unknown-session",
            ApiError::CommanderConflict(_) => "commander-conflict",
            ApiError::BadRequest(_) => "bad-request",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::InvalidConfig { .. } | ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::CapacityExceeded { .. } => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ApiError::CommanderConflict(_) => StatusCode::CONFLICT,
        }
    }
}

impl From<claw_core::scenario::ConfigError> for ApiError {
    fn from(e: claw_core::scenario::ConfigError) -> Self {
        ApiError::InvalidConfig { field: e.field, message: e.message }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        if let ApiError::InvalidConfig { field, message } = &self {
            body["field"] = json!(field);
            body["message"] = json!(message);
        }
        (self.status(), Json(body)).into_response()
    }
}
