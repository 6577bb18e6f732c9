use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use teval_core::admin::AdminError;
use teval_core::bank::BankError;
use teval_core::model::SessionMode;
use teval_core::results::ResultsError;
use teval_core::session::{QuestionView, RejectReason, SessionError};
use teval_core::store::StoreError;
use teval_core::wire::{ErrorBody, ErrorCode};

#[derive(Debug)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    pub mode: Option<SessionMode>,
    pub retry: Option<Box<QuestionView>>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> ApiError {
        ApiError { code, message: message.into(), mode: None, retry: None }
    }

    pub fn with_mode(mut self, mode: SessionMode) -> ApiError {
        self.mode = Some(mode);
        self
    }

    pub fn rejected(reason: RejectReason, retry: Option<QuestionView>) -> ApiError {
        let code = match reason {
            RejectReason::OutOfSequence => ErrorCode::OutOfSequence,
            RejectReason::MissingSelection => ErrorCode::MissingSelection,
            RejectReason::ValueOutOfRange => ErrorCode::ValueOutOfRange,
        };
        ApiError { code, message: reason.message().into(), mode: None, retry: retry.map(Box::new) }
    }

    pub fn not_found() -> ApiError {
        ApiError::new(ErrorCode::NotFound, "no such resource")
    }

    pub fn storage(e: impl std::fmt::Display) -> ApiError {
        tracing::error!("storage failure: {e}");
        ApiError::new(ErrorCode::StorageFailure, "the server could not complete the request")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.code.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = ErrorBody { code: self.code, message: self.message, mode: self.mode, retry: self.retry.map(|r| *r) };
        (status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::TeacherInUse(_) => ApiError::new(ErrorCode::TeacherInUse, e.to_string()),
            StoreError::UnknownTeacher(_) => ApiError::new(ErrorCode::TeacherNotFound, e.to_string()),
            StoreError::ConflictRetry | StoreError::SessionComplete => {
                ApiError::new(ErrorCode::OutOfSequence, e.to_string())
            }
            StoreError::UnknownSession => ApiError::new(ErrorCode::NoSession, e.to_string()),
            other => ApiError::storage(other),
        }
    }
}

impl From<BankError> for ApiError {
    fn from(e: BankError) -> Self {
        ApiError::new(ErrorCode::BankInvalid, e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let e = match e {
            SessionError::Store(inner) => return inner.into(),
            other => other,
        };
        let code = match &e {
            SessionError::NoTeacherSelected => ErrorCode::NoTeacherSelected,
            SessionError::DeadlineExceeded => ErrorCode::DeadlineExceeded,
            SessionError::AlreadyCompleted => ErrorCode::AlreadyCompleted,
            SessionError::SessionClosed => ErrorCode::CampaignClosed,
            SessionError::NoSession => ErrorCode::NoSession,
            SessionError::ResetForbidden => ErrorCode::ResetForbidden,
            SessionError::EmptyBank | SessionError::Bank(_) => ErrorCode::BankInvalid,
            SessionError::Store(_) => ErrorCode::StorageFailure,
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<AdminError> for ApiError {
    fn from(e: AdminError) -> Self {
        let e = match e {
            AdminError::Store(inner) => return inner.into(),
            other => other,
        };
        let code = match &e {
            AdminError::Unauthorized => ErrorCode::Unauthorized,
            AdminError::NoTeacherSelected => ErrorCode::NoTeacherSelected,
            AdminError::InvalidAddress(_) => ErrorCode::InvalidAddress,
            AdminError::InvalidDeadline => ErrorCode::InvalidDeadline,
            AdminError::TeacherInUse(_) => ErrorCode::TeacherInUse,
            AdminError::TeacherNotFound(_) => ErrorCode::TeacherNotFound,
            AdminError::InvalidTeacher(_) => ErrorCode::InvalidTeacher,
            AdminError::NoBankSource => ErrorCode::NoBankSource,
            AdminError::Bank(_) => ErrorCode::BankInvalid,
            AdminError::Store(_) => ErrorCode::StorageFailure,
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<ResultsError> for ApiError {
    fn from(e: ResultsError) -> Self {
        let code = match e {
            ResultsError::NotFound(_) => ErrorCode::NotFound,
            ResultsError::Incomplete(_) => ErrorCode::Incomplete,
        };
        ApiError::new(code, e.to_string())
    }
}
