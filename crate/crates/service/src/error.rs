use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::Serialize;
use serde_json::{json, Value};
use stakeweigh_core::canonical;
use stakeweigh_core::session::SessionError;

use crate::store::StoreError;

/// An error response: `{"error": {"code", "message", "details"}}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn unauthorized() -> Self {
        Self::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "missing or invalid bearer token",
        )
    }

    pub fn forbidden(message: &str) -> Self {
        Self::new(StatusCode::FORBIDDEN, "forbidden", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.code, "message": self.message });
        if let Some(details) = self.details {
            body["details"] = details;
        }
        (self.status, Canonical(json!({ "error": body }))).into_response()
    }
}

/// A JSON body written with the canonical writer: sorted keys, 12
/// significant digits.
pub struct Canonical<T>(pub T);

impl<T: Serialize> IntoResponse for Canonical<T> {
    fn into_response(self) -> Response {
        match canonical::to_string(&self.0) {
            Ok(body) => ([(header::CONTENT_TYPE, "application/json")], body).into_response(),
            Err(e) => {
                tracing::error!(error = %e, "response serialization failed");
                StatusCode::INTERNAL_SERVER_ERROR.into_response()
            }
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use SessionError as E;
        let conflict = StatusCode::CONFLICT;
        let invalid = StatusCode::UNPROCESSABLE_ENTITY;
        let (status, code) = match &e {
            E::WrongPhase { .. } => (conflict, "wrong_phase"),
            E::Closed => (conflict, "session_closed"),
            E::UnknownStakeholder => (StatusCode::NOT_FOUND, "unknown_stakeholder"),
            E::UnknownAttribute(_) => (invalid, "unknown_attribute"),
            E::DuplicateAttribute(_) => (invalid, "duplicate_attribute"),
            E::DuplicateParticipant(_) => (invalid, "duplicate_participant"),
            E::TooFewAttributes(_) => (invalid, "too_few_attributes"),
            E::NoParticipants => (invalid, "no_participants"),
            E::InvalidWeight => (invalid, "invalid_weight"),
            E::InvalidAttribute(_) => (invalid, "invalid_attribute"),
            E::InvalidConfig(_) => (invalid, "invalid_config"),
            E::Delegating => (conflict, "delegating"),
            E::InvalidDelegation(_) => (invalid, "invalid_delegation"),
            E::DelegationCycle => (conflict, "delegation_cycle"),
            E::NoDelegation => (StatusCode::NOT_FOUND, "no_delegation"),
            E::Inconsistent(_) => (invalid, "inconsistent"),
            E::Matrix(_) => (invalid, "invalid_matrix"),
            E::MatrixAttributeMismatch => (invalid, "matrix_attribute_mismatch"),
            E::TooFewRemainingAttributes(_) => (invalid, "too_few_remaining_attributes"),
            E::DuplicateAbstention(_) => (invalid, "duplicate_abstention"),
            E::IncompleteRound(_) => (conflict, "incomplete_round"),
            E::IllegalTransition { .. } => (conflict, "illegal_transition"),
            E::DissentOutsideRound3 => (conflict, "dissent_outside_round3"),
            E::AlreadyDissented => (conflict, "already_dissented"),
            E::NoSubmission => (conflict, "no_submission"),
            E::InvalidRationale(_) => (invalid, "invalid_rationale"),
            E::UnknownPrompt(_) => (invalid, "unknown_prompt"),
            E::Aggregation(_) => (conflict, "aggregation_failed"),
            E::Utility(_) => (invalid, "invalid_utility"),
        };
        let details = match &e {
            E::Inconsistent(report) => Some(json!({ "consistency": report })),
            E::IncompleteRound(waiting) => Some(json!({ "waiting_for": waiting })),
            _ => None,
        };
        let mut err = ApiError::new(status, code, e.to_string());
        err.details = details;
        err
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownSession => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_session", "unknown session")
            }
            StoreError::ReadOnly(damage) => ApiError::new(
                StatusCode::LOCKED,
                "read_only",
                format!(
                    "session log is damaged at line {}; the facilitator must recover it",
                    damage.line
                ),
            ),
            StoreError::NotDamaged => {
                ApiError::new(StatusCode::CONFLICT, "not_damaged", "session log is intact")
            }
            StoreError::Session(e) => e.into(),
            StoreError::Io(e) => {
                tracing::error!(error = %e, "storage failure");
                ApiError::new(
                    StatusCode::INTERNAL_SERVER_ERROR,
                    "storage_failure",
                    "the change could not be persisted",
                )
            }
            StoreError::Unrecoverable { reason, .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_failure", reason)
            }
        }
    }
}
