//! JSON bodies exchanged between the HTTP service and its clients.

use serde::{Deserialize, Serialize};

use crate::model::SessionMode;
use crate::session::{ClosedNotice, CompletedNotice, QuestionView};

/// Machine-readable error codes. Each maps to exactly one HTTP status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    OutOfSequence,
    MissingSelection,
    ValueOutOfRange,
    AlreadyCompleted,
    CampaignClosed,
    DeadlineExceeded,
    NoSession,
    NoTeacherSelected,
    ResetForbidden,
    InvalidAddress,
    Unauthorized,
    TeacherInUse,
    TeacherNotFound,
    InvalidTeacher,
    InvalidDeadline,
    BankInvalid,
    NoBankSource,
    NotFound,
    Incomplete,
    InvalidRequest,
    StorageFailure,
}

impl ErrorCode {
    pub fn http_status(self) -> u16 {
        use ErrorCode::*;
        match self {
            InvalidRequest => 400,
            Unauthorized => 401,
            CampaignClosed | ResetForbidden => 403,
            NotFound | TeacherNotFound => 404,
            OutOfSequence | AlreadyCompleted | DeadlineExceeded | NoSession | NoTeacherSelected | TeacherInUse
            | NoBankSource | Incomplete => 409,
            MissingSelection | ValueOutOfRange | InvalidAddress | InvalidTeacher | InvalidDeadline | BankInvalid => 422,
            StorageFailure => 500,
        }
    }

    pub fn as_str(self) -> &'static str {
        use ErrorCode::*;
        match self {
            OutOfSequence => "OUT_OF_SEQUENCE",
            MissingSelection => "MISSING_SELECTION",
            ValueOutOfRange => "VALUE_OUT_OF_RANGE",
            AlreadyCompleted => "ALREADY_COMPLETED",
            CampaignClosed => "CAMPAIGN_CLOSED",
            DeadlineExceeded => "DEADLINE_EXCEEDED",
            NoSession => "NO_SESSION",
            NoTeacherSelected => "NO_TEACHER_SELECTED",
            ResetForbidden => "RESET_FORBIDDEN",
            InvalidAddress => "INVALID_ADDRESS",
            Unauthorized => "UNAUTHORIZED",
            TeacherInUse => "TEACHER_IN_USE",
            TeacherNotFound => "TEACHER_NOT_FOUND",
            InvalidTeacher => "INVALID_TEACHER",
            InvalidDeadline => "INVALID_DEADLINE",
            BankInvalid => "BANK_INVALID",
            NoBankSource => "NO_BANK_SOURCE",
            NotFound => "NOT_FOUND",
            Incomplete => "INCOMPLETE",
            InvalidRequest => "INVALID_REQUEST",
            StorageFailure => "STORAGE_FAILURE",
        }
    }
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
    /// Present on student-plane errors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<SessionMode>,
    /// The question actually waiting for an answer, on submit rejections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry: Option<QuestionView>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Question,
    Completed,
    Closed,
}

/// Student-plane success body. Exactly one of `question`, `completed` and
/// `closed` is set, matching `state`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionResponse {
    pub state: SessionState,
    pub mode: SessionMode,
    pub reset_allowed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<QuestionView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completed: Option<CompletedNotice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed: Option<ClosedNotice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub question_index: u32,
    /// Absent or null when no option was selected.
    #[serde(default)]
    pub value: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetResponse {
    pub mode: SessionMode,
    pub reset_allowed: bool,
    pub deleted_answers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReloadResponse {
    pub items: usize,
}
