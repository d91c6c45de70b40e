use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

use crate::store::StoreError;

/// Error body: `{code, message, detail}`.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>, detail: Value) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
            detail,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_input", message, json!({}))
    }

    pub fn unknown_case(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_case",
            format!("no case with id {id}"),
            json!({ "case_id": id }),
        )
    }
}

impl From<gridshape_core::Error> for ApiError {
    fn from(e: gridshape_core::Error) -> Self {
        let status = if e.is_infeasible() {
            StatusCode::UNPROCESSABLE_ENTITY
        } else if e.is_numeric() {
            StatusCode::INTERNAL_SERVER_ERROR
        } else {
            StatusCode::BAD_REQUEST
        };
        Self::new(status, e.code(), e.to_string(), e.detail())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Case(e) => e.into(),
            StoreError::NotFound(id) => Self::unknown_case(&id),
            StoreError::Io(e) => Self::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "storage_error",
                e.to_string(),
                json!({}),
            ),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}
