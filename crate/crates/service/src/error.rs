use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use marginalia_core::review::ReviewError;
use serde::{Deserialize, Serialize};

/// Body of every non-2xx response: `{"error": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub error: ErrorBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            field: None,
        }
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("unknown {what} {id}"))
            .with_field(format!("{what}_id"))
    }

    pub fn provider(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_GATEWAY, "provider_unavailable", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let status = match &e {
            ReviewError::UnknownComment(_)
            | ReviewError::UnknownEssay(_)
            | ReviewError::UnknownAssignment(_)
            | ReviewError::UnknownRubric(_)
            | ReviewError::UnknownRun(_) => StatusCode::NOT_FOUND,
            ReviewError::InvalidAction(_) | ReviewError::Validation(_) => StatusCode::BAD_REQUEST,
            ReviewError::ItemMismatch { .. } | ReviewError::NoData(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ReviewError::Conflict(_) => StatusCode::CONFLICT,
            ReviewError::Io(_) | ReviewError::Corrupt { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let field = match &e {
            ReviewError::UnknownComment(_) => Some("comment_id".to_string()),
            ReviewError::UnknownEssay(_) => Some("essay_id".into()),
            ReviewError::UnknownAssignment(_) => Some("assignment_id".into()),
            ReviewError::UnknownRubric(_) => Some("rubric_id".into()),
            ReviewError::UnknownRun(_) => Some("run_id".into()),
            ReviewError::Validation(errors) => errors.first().map(|v| v.field.clone()),
            _ => None,
        };
        debug_assert_eq!(e.is_caller_error(), status.is_client_error());
        ApiError {
            status,
            code: e.code(),
            message: e.to_string(),
            field,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        }
        let body = ErrorEnvelope {
            error: ErrorBody {
                code: self.code.to_string(),
                message: self.message,
                field: self.field,
            },
        };
        (self.status, Json(body)).into_response()
    }
}
