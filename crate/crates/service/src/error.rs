use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gag_core::distribution::{DistError, MergeError};
use gag_core::grammar::Violation;
use serde::Serialize;
use thiserror::Error;

/// Every error body carries a machine-readable `code`.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{message}")]
    NotFound { code: &'static str, message: String },
    #[error("{message}")]
    Conflict { code: &'static str, message: String },
    #[error("{message}")]
    Invalid { code: &'static str, message: String, violations: Vec<Violation> },
}

impl ServiceError {
    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        ServiceError::NotFound { code, message: message.into() }
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        ServiceError::Conflict { code, message: message.into() }
    }

    pub fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        ServiceError::Invalid { code, message: message.into(), violations: Vec::new() }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound { .. } => StatusCode::NOT_FOUND,
            ServiceError::Conflict { .. } => StatusCode::CONFLICT,
            ServiceError::Invalid { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound { code, .. }
            | ServiceError::Conflict { code, .. }
            | ServiceError::Invalid { code, .. } => code,
        }
    }
}

impl From<DistError> for ServiceError {
    fn from(e: DistError) -> Self {
        let code = e.code();
        let message = e.to_string();
        match code {
            "UnknownLocation" | "UnknownNode" | "UnknownMessage" => ServiceError::not_found(code, message),
            "NotEnabled" | "TriggeredButCyclic" | "NodeClosed" | "AlreadyAssigned" | "Integrity" => {
                ServiceError::conflict(code, message)
            }
            _ => ServiceError::invalid(code, message),
        }
    }
}

impl From<MergeError> for ServiceError {
    fn from(e: MergeError) -> Self {
        ServiceError::conflict(e.code(), e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    violations: Vec<ViolationView>,
}

#[derive(Serialize)]
struct ViolationView {
    text: String,
    #[serde(flatten)]
    violation: Violation,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        let code = self.code();
        let message = self.to_string();
        let violations = match self {
            ServiceError::Invalid { violations, .. } => {
                violations.into_iter().map(|v| ViolationView { text: v.to_string(), violation: v }).collect()
            }
            _ => Vec::new(),
        };
        (status, Json(ErrorBody { code, message, violations })).into_response()
    }
}
