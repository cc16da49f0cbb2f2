use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use chordcorr_core::ensemble::EnsembleError;
use chordcorr_core::pipeline::PipelineError;

/// Error body: `{"error": code, "message": text}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        Self { status, error, message: message.into() }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} {id:?} not found"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn out_of_range(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "out_of_range", message)
    }

    pub fn gone(message: impl Into<String>) -> Self {
        Self::new(StatusCode::GONE, "gone", message)
    }

    pub fn not_ready(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "not_ready", message)
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Ensemble(e) => e.into(),
            PipelineError::Layout(_) | PipelineError::Sampling(_) | PipelineError::InvalidConfig(_) => {
                Self::bad_request(e.to_string())
            }
            PipelineError::Cancelled => Self::new(StatusCode::CONFLICT, "cancelled", e.to_string()),
        }
    }
}

impl From<EnsembleError> for ApiError {
    fn from(e: EnsembleError) -> Self {
        match e {
            EnsembleError::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => {
                Self::new(StatusCode::NOT_FOUND, "not_found", e.to_string())
            }
            EnsembleError::SpecParse { .. } | EnsembleError::InvalidSpec(_) | EnsembleError::UnknownVariable(_) => {
                Self::bad_request(e.to_string())
            }
            EnsembleError::FinestLevel => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "finest_level", e.to_string()),
            _ => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "data_error", e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}
