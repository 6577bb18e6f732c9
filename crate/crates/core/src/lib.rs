//! Student questionnaire campaigns for evaluating teaching staff.
//!
//! Respondents are identified by source address and answer a fixed Likert
//! questionnaire one item at a time. The server alone decides which item is
//! next. A campaign flag and an address allowlist decide whether a visitor
//! answers officially, tries a resettable demo run, or finds the campaign
//! closed.
//!
//! - [`model`]: domain values and their validation
//! - [`bank`]: question bank loading
//! - [`access`]: the three-state access policy
//! - [`session`]: the sequential answering state machine
//! - [`store`]: journaled storage
//! - [`admin`]: the authenticated control plane
//! - [`results`]: scoring, result tables and printable reports
//! - [`wire`]: JSON bodies shared by server and clients

pub mod access;
pub mod admin;
pub mod auth;
pub mod bank;
pub mod model;
pub mod results;
pub mod session;
pub mod store;
pub mod wire;

pub use access::{authorize_reset, classify_access, AccessDecision};
pub use bank::{validate_question_bank, QuestionBank};
pub use model::{
    make_answer_value, AnswerValue, CampaignConfig, ClientIp, Direction, EvaluationSession, Question, SessionKey,
    SessionMode, Teacher, TeacherId, Timestamp,
};
pub use results::{list_results, printable_report, score_item, PrintableReport, ResultRow};
pub use session::{OpenOutcome, QuestionView, SessionEngine, SubmitOutcome};
pub use store::Store;
