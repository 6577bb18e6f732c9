//! The questionnaire state machine.
//!
//! Progress is server-authoritative: a submission is accepted only when it
//! answers exactly the question after the persisted `last_answered`. Anything
//! else (a page replayed from the browser cache, an edited form that skips
//! ahead, a duplicate) is rejected without touching the store, and the caller
//! gets the true current question back.

use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::access::{authorize_reset, classify, AccessDecision};
use crate::bank::{BankError, QuestionBank};
use crate::model::{
    make_answer_value, CampaignConfig, ClientIp, EvaluationSession, Question, SessionKey, SessionMode, TeacherId,
    Timestamp,
};
use crate::store::{Store, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub answered: u32,
    pub total: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionView {
    pub question: Question,
    pub teacher_display_name: String,
    pub progress: Progress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status_message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletedNotice {
    pub teacher_display_name: String,
    pub questionnaire_no: Option<u64>,
    pub completed_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedNotice {
    pub message: String,
}

impl Default for ClosedNotice {
    fn default() -> Self {
        ClosedNotice { message: "The evaluation campaign is not active.".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpenOutcome {
    Question(QuestionView),
    Completed(CompletedNotice),
    Closed(ClosedNotice),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    OutOfSequence,
    MissingSelection,
    ValueOutOfRange,
}

impl RejectReason {
    pub fn message(self) -> &'static str {
        match self {
            RejectReason::OutOfSequence => "That question is not the one waiting for an answer.",
            RejectReason::MissingSelection => "Please select one of the answers before continuing.",
            RejectReason::ValueOutOfRange => "The submitted answer is not one of the allowed values.",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubmitOutcome {
    Accepted(QuestionView),
    Completed(CompletedNotice),
    /// State unchanged. `retry` is the question still waiting for an answer,
    /// absent only if a concurrent submission finished the questionnaire.
    Rejected {
        reason: RejectReason,
        retry: Option<QuestionView>,
    },
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("the campaign is active but no teacher is selected")]
    NoTeacherSelected,
    #[error("the time allowed for this questionnaire has run out")]
    DeadlineExceeded,
    #[error("this questionnaire has already been completed")]
    AlreadyCompleted,
    #[error("the campaign is not active")]
    SessionClosed,
    #[error("no questionnaire has been started from this address")]
    NoSession,
    #[error("reset is only available in demo mode")]
    ResetForbidden,
    #[error("the question bank must not be empty")]
    EmptyBank,
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeadlineStatus {
    Within,
    Exceeded,
}

/// A session is over time once strictly more than `deadline_seconds` have
/// elapsed since it started.
pub fn check_deadline(session: &EvaluationSession, config: &CampaignConfig, now: Timestamp) -> DeadlineStatus {
    match config.deadline_seconds {
        Some(limit) if (now - session.started_at).num_seconds() > limit as i64 => DeadlineStatus::Exceeded,
        _ => DeadlineStatus::Within,
    }
}

pub struct SessionEngine {
    store: Arc<Store>,
    bank: RwLock<Arc<QuestionBank>>,
}

impl SessionEngine {
    pub fn new(store: Arc<Store>, bank: QuestionBank) -> Result<SessionEngine, SessionError> {
        if bank.is_empty() {
            return Err(SessionError::EmptyBank);
        }
        Ok(SessionEngine { store, bank: RwLock::new(Arc::new(bank)) })
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn bank(&self) -> Arc<QuestionBank> {
        self.bank.read().clone()
    }

    pub fn question_count(&self) -> u32 {
        self.bank.read().len() as u32
    }

    /// Swaps in a new bank. Its length must match the running questionnaire.
    pub fn replace_bank(&self, bank: QuestionBank) -> Result<(), BankError> {
        let mut current = self.bank.write();
        if bank.len() != current.len() {
            return Err(BankError::BankLength { found: bank.len(), expected: current.len() });
        }
        *current = Arc::new(bank);
        Ok(())
    }

    fn teacher_name(&self, id: &TeacherId) -> String {
        self.store.teacher(id).map(|t| t.teacher.display_name).unwrap_or_else(|| id.to_string())
    }

    fn view(&self, bank: &QuestionBank, session: &EvaluationSession, status: Option<&str>) -> Option<QuestionView> {
        if session.is_complete() {
            return None;
        }
        let question = bank.get(session.last_answered + 1)?.clone();
        Some(QuestionView {
            question,
            teacher_display_name: self.teacher_name(&session.teacher_id),
            progress: Progress { answered: session.last_answered, total: session.total },
            status_message: status.map(str::to_owned),
        })
    }

    fn completed_notice(&self, session: &EvaluationSession) -> CompletedNotice {
        let questionnaire_no = self.store.questionnaire_no(&session.key());
        CompletedNotice {
            teacher_display_name: self.teacher_name(&session.teacher_id),
            questionnaire_no,
            completed_at: session.completed_at,
        }
    }

    pub fn access(&self, client_ip: &ClientIp, config: &CampaignConfig) -> AccessDecision {
        classify(client_ip, config)
    }

    /// Serves the current question for `client_ip`, opening a session on
    /// first contact.
    pub fn open_or_resume(
        &self,
        client_ip: &ClientIp,
        config: &CampaignConfig,
        now: Timestamp,
    ) -> Result<OpenOutcome, SessionError> {
        let decision = classify(client_ip, config);
        if decision.mode == SessionMode::Closed {
            return Ok(OpenOutcome::Closed(ClosedNotice::default()));
        }
        let teacher_id = config.current_teacher.clone().ok_or(SessionError::NoTeacherSelected)?;
        let bank = self.bank();
        let key = SessionKey::new(*client_ip, teacher_id);
        let session = self.store.open_session(&key, decision.mode, bank.len() as u32, now)?;
        if session.is_complete() {
            return Ok(OpenOutcome::Completed(self.completed_notice(&session)));
        }
        if check_deadline(&session, config, now) == DeadlineStatus::Exceeded {
            return Err(SessionError::DeadlineExceeded);
        }
        let view = self.view(&bank, &session, None).ok_or(SessionError::AlreadyCompleted)?;
        Ok(OpenOutcome::Question(view))
    }

    /// Accepts an answer only if it is for the question after the persisted
    /// progress. `raw` is `None` when the form carried no selection.
    pub fn submit_answer(
        &self,
        client_ip: &ClientIp,
        teacher_id: &TeacherId,
        question_index: u32,
        raw: Option<i64>,
        config: &CampaignConfig,
        now: Timestamp,
    ) -> Result<SubmitOutcome, SessionError> {
        if classify(client_ip, config).mode == SessionMode::Closed {
            return Err(SessionError::SessionClosed);
        }
        let key = SessionKey::new(*client_ip, teacher_id.clone());
        let session = self.store.session(&key).ok_or(SessionError::NoSession)?;
        if session.is_complete() {
            return Err(SessionError::AlreadyCompleted);
        }
        if check_deadline(&session, config, now) == DeadlineStatus::Exceeded {
            return Err(SessionError::DeadlineExceeded);
        }
        let bank = self.bank();
        let reject = |reason: RejectReason, session: &EvaluationSession| SubmitOutcome::Rejected {
            reason,
            retry: self.view(&bank, session, Some(reason.message())),
        };

        if question_index != session.last_answered + 1 {
            return Ok(reject(RejectReason::OutOfSequence, &session));
        }
        let value = match raw.map(make_answer_value) {
            None => return Ok(reject(RejectReason::MissingSelection, &session)),
            Some(Err(_)) => return Ok(reject(RejectReason::ValueOutOfRange, &session)),
            Some(Ok(v)) => v,
        };

        match self.store.record_answer_and_advance(&key, question_index, value, now) {
            Ok(_) => {}
            // Lost a race with another submission for the same question.
            Err(StoreError::ConflictRetry) | Err(StoreError::SessionComplete) => {
                let current = self.store.session(&key).ok_or(SessionError::NoSession)?;
                return Ok(reject(RejectReason::OutOfSequence, &current));
            }
            Err(StoreError::UnknownSession) => return Err(SessionError::NoSession),
            Err(e) => return Err(e.into()),
        }

        let session = self.store.session(&key).ok_or(SessionError::NoSession)?;
        if session.is_complete() {
            Ok(SubmitOutcome::Completed(self.completed_notice(&session)))
        } else {
            let next = self.view(&bank, &session, None).ok_or(SessionError::AlreadyCompleted)?;
            Ok(SubmitOutcome::Accepted(next))
        }
    }

    /// Deletes the demo recordings of `client_ip`. Returns the number of
    /// answers removed.
    pub fn reset_demo(&self, client_ip: &ClientIp, config: &CampaignConfig) -> Result<usize, SessionError> {
        authorize_reset(classify(client_ip, config)).map_err(|_| SessionError::ResetForbidden)?;
        Ok(self.store.purge_ip(client_ip)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Teacher;
    use chrono::TimeZone;

    fn at(secs: i64) -> Timestamp {
        chrono::Utc.timestamp_opt(1_700_000_000 + secs, 0).unwrap()
    }

    fn ip(s: &str) -> ClientIp {
        ClientIp::parse(s).unwrap()
    }

    struct Fixture {
        engine: SessionEngine,
        config: CampaignConfig,
        teacher: TeacherId,
    }

    fn fixture(bank: QuestionBank) -> Fixture {
        let store = Arc::new(Store::in_memory());
        let teacher = TeacherId::new("karnyanszky").unwrap();
        store.upsert_teacher(Teacher::new(teacher.clone(), "Conf.dr. Tiberiu Marius Karnyanszky").unwrap()).unwrap();
        let config = CampaignConfig {
            active: true,
            current_teacher: Some(teacher.clone()),
            allowlist: [ip("10.0.0.1")].into_iter().collect(),
            ..Default::default()
        };
        Fixture { engine: SessionEngine::new(store, bank).unwrap(), config, teacher }
    }

    impl Fixture {
        fn open(&self, addr: &str) -> OpenOutcome {
            self.engine.open_or_resume(&ip(addr), &self.config, at(0)).unwrap()
        }

        fn submit(&self, addr: &str, idx: u32, raw: Option<i64>) -> SubmitOutcome {
            self.engine.submit_answer(&ip(addr), &self.teacher, idx, raw, &self.config, at(idx as i64)).unwrap()
        }

        fn last(&self, addr: &str) -> u32 {
            let key = SessionKey::new(ip(addr), self.teacher.clone());
            self.engine.store().session(&key).unwrap().last_answered
        }

        fn fill(&self, addr: &str, n: u32) {
            for i in 1..=n {
                self.submit(addr, i, Some(4));
            }
        }
    }

    fn question(outcome: OpenOutcome) -> QuestionView {
        match outcome {
            OpenOutcome::Question(v) => v,
            other => panic!("expected a question, got {other:?}"),
        }
    }

    #[test]
    fn fresh_respondent_gets_question_one() {
        let f = fixture(QuestionBank::sample());
        let v = question(f.open("10.0.0.1"));
        assert_eq!(v.question.index, 1);
        assert_eq!(v.progress, Progress { answered: 0, total: 58 });
        assert_eq!(v.teacher_display_name, "Conf.dr. Tiberiu Marius Karnyanszky");
    }

    #[test]
    fn resumes_at_next_question() {
        let f = fixture(QuestionBank::sample());
        f.open("10.0.0.1");
        f.fill("10.0.0.1", 1);
        let v = question(f.open("10.0.0.1"));
        assert_eq!(v.question.index, 2);
        assert_eq!(v.question.text, "Arată respect studenților.");
    }

    #[test]
    fn completed_respondent_gets_notice() {
        let f = fixture(QuestionBank::synthetic(3));
        f.open("10.0.0.1");
        f.fill("10.0.0.1", 3);
        match f.open("10.0.0.1") {
            OpenOutcome::Completed(n) => assert_eq!(n.questionnaire_no, Some(1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inactive_campaign_is_closed_for_everyone() {
        let mut f = fixture(QuestionBank::synthetic(3));
        f.config.active = false;
        assert!(matches!(f.open("10.0.0.1"), OpenOutcome::Closed(_)));
        assert!(matches!(f.open("192.0.2.1"), OpenOutcome::Closed(_)));
        assert!(f.engine.store().sessions().is_empty());
    }

    #[test]
    fn active_without_teacher_is_a_config_fault() {
        let mut f = fixture(QuestionBank::synthetic(3));
        f.config.current_teacher = None;
        assert!(matches!(
            f.engine.open_or_resume(&ip("10.0.0.1"), &f.config, at(0)),
            Err(SessionError::NoTeacherSelected)
        ));
    }

    #[test]
    fn accepts_next_index_only() {
        let f = fixture(QuestionBank::synthetic(10));
        f.open("10.0.0.1");
        f.fill("10.0.0.1", 1);
        match f.submit("10.0.0.1", 2, Some(5)) {
            SubmitOutcome::Accepted(next) => assert_eq!(next.question.index, 3),
            other => panic!("{other:?}"),
        }
        assert_eq!(f.last("10.0.0.1"), 2);
    }

    #[test]
    fn replay_and_skip_are_rejected() {
        let f = fixture(QuestionBank::synthetic(10));
        f.open("10.0.0.1");
        f.fill("10.0.0.1", 5);
        for idx in [3, 9, 5] {
            match f.submit("10.0.0.1", idx, Some(4)) {
                SubmitOutcome::Rejected { reason: RejectReason::OutOfSequence, retry: Some(v) } => {
                    assert_eq!(v.question.index, 6);
                    assert!(v.status_message.is_some());
                }
                other => panic!("{other:?}"),
            }
            assert_eq!(f.last("10.0.0.1"), 5);
        }
    }

    #[test]
    fn missing_or_bad_selection_reserves_same_question() {
        let f = fixture(QuestionBank::synthetic(10));
        f.open("10.0.0.1");
        f.fill("10.0.0.1", 2);
        for (raw, reason) in [
            (None, RejectReason::MissingSelection),
            (Some(6), RejectReason::ValueOutOfRange),
            (Some(0), RejectReason::ValueOutOfRange),
        ] {
            match f.submit("10.0.0.1", 3, raw) {
                SubmitOutcome::Rejected { reason: r, retry: Some(v) } => {
                    assert_eq!(r, reason);
                    assert_eq!(v.question.index, 3);
                }
                other => panic!("{other:?}"),
            }
        }
        assert_eq!(f.last("10.0.0.1"), 2);
    }

    #[test]
    fn final_answer_completes_and_locks() {
        let f = fixture(QuestionBank::synthetic(4));
        f.open("10.0.0.1");
        f.fill("10.0.0.1", 3);
        assert!(matches!(f.submit("10.0.0.1", 4, Some(3)), SubmitOutcome::Completed(_)));
        let key = SessionKey::new(ip("10.0.0.1"), f.teacher.clone());
        assert!(f.engine.store().session(&key).unwrap().completed_at.is_some());
        for idx in [4, 5, 1] {
            assert!(matches!(
                f.engine.submit_answer(&ip("10.0.0.1"), &f.teacher, idx, Some(3), &f.config, at(9)),
                Err(SessionError::AlreadyCompleted)
            ));
        }
    }

    #[test]
    fn submit_without_session_or_when_closed() {
        let mut f = fixture(QuestionBank::synthetic(4));
        assert!(matches!(
            f.engine.submit_answer(&ip("10.0.0.1"), &f.teacher, 1, Some(3), &f.config, at(0)),
            Err(SessionError::NoSession)
        ));
        f.open("10.0.0.1");
        f.config.active = false;
        assert!(matches!(
            f.engine.submit_answer(&ip("10.0.0.1"), &f.teacher, 1, Some(3), &f.config, at(0)),
            Err(SessionError::SessionClosed)
        ));
    }

    #[test]
    fn demo_reset_restarts() {
        let f = fixture(QuestionBank::synthetic(10));
        f.open("192.0.2.5");
        f.fill("192.0.2.5", 7);
        assert_eq!(f.engine.reset_demo(&ip("192.0.2.5"), &f.config).unwrap(), 7);
        assert_eq!(question(f.open("192.0.2.5")).question.index, 1);
        // Nothing to delete the second time round.
        f.engine.reset_demo(&ip("192.0.2.5"), &f.config).unwrap();
        assert_eq!(f.engine.reset_demo(&ip("192.0.2.77"), &f.config).unwrap(), 0);
    }

    #[test]
    fn official_reset_is_forbidden() {
        let mut f = fixture(QuestionBank::synthetic(10));
        f.open("10.0.0.1");
        f.fill("10.0.0.1", 3);
        assert!(matches!(f.engine.reset_demo(&ip("10.0.0.1"), &f.config), Err(SessionError::ResetForbidden)));
        assert_eq!(f.last("10.0.0.1"), 3);
        f.config.active = false;
        assert!(matches!(f.engine.reset_demo(&ip("192.0.2.5"), &f.config), Err(SessionError::ResetForbidden)));
    }

    #[test]
    fn mode_fixed_at_first_contact() {
        let mut f = fixture(QuestionBank::synthetic(5));
        f.open("192.0.2.5");
        f.config.allowlist.insert(ip("192.0.2.5"));
        f.open("192.0.2.5");
        let key = SessionKey::new(ip("192.0.2.5"), f.teacher.clone());
        assert_eq!(f.engine.store().session(&key).unwrap().mode, SessionMode::Demo);
    }

    #[test]
    fn new_teacher_starts_fresh_sessions() {
        let mut f = fixture(QuestionBank::synthetic(2));
        f.open("10.0.0.1");
        f.fill("10.0.0.1", 2);
        let other = TeacherId::new("luca").unwrap();
        f.engine.store().upsert_teacher(Teacher::new(other.clone(), "Conf. dr. Lucian Luca").unwrap()).unwrap();
        f.config.current_teacher = Some(other);
        let v = question(f.open("10.0.0.1"));
        assert_eq!(v.question.index, 1);
        assert_eq!(v.teacher_display_name, "Conf. dr. Lucian Luca");
        assert_eq!(f.engine.store().snapshot_results(None, true, false).len(), 1);
    }

    // Independent oracle: elapsed > limit, computed on raw epoch seconds.
    fn deadline_oracle(limit: Option<u64>, elapsed: i64) -> DeadlineStatus {
        match limit {
            Some(l) if elapsed > l as i64 => DeadlineStatus::Exceeded,
            _ => DeadlineStatus::Within,
        }
    }

    #[test]
    fn deadline_boundary() {
        let session = EvaluationSession {
            client_ip: ip("10.0.0.1"),
            teacher_id: TeacherId::new("t").unwrap(),
            last_answered: 0,
            total: 5,
            mode: SessionMode::Official,
            started_at: at(0),
            completed_at: None,
        };
        let cfg = |d| CampaignConfig { deadline_seconds: d, ..Default::default() };
        assert_eq!(check_deadline(&session, &cfg(None), at(1_000_000)), DeadlineStatus::Within);
        assert_eq!(check_deadline(&session, &cfg(Some(1800)), at(1801)), DeadlineStatus::Exceeded);
        assert_eq!(check_deadline(&session, &cfg(Some(1800)), at(1800)), DeadlineStatus::Within);
        for elapsed in 1799..=1801 {
            assert_eq!(
                check_deadline(&session, &cfg(Some(1800)), at(elapsed)),
                deadline_oracle(Some(1800), elapsed),
                "elapsed {elapsed}"
            );
        }
    }

    #[test]
    fn deadline_freezes_session() {
        let mut f = fixture(QuestionBank::synthetic(5));
        f.config.deadline_seconds = Some(60);
        f.open("10.0.0.1");
        f.fill("10.0.0.1", 2);
        assert!(matches!(
            f.engine.submit_answer(&ip("10.0.0.1"), &f.teacher, 3, Some(4), &f.config, at(61)),
            Err(SessionError::DeadlineExceeded)
        ));
        assert!(matches!(
            f.engine.open_or_resume(&ip("10.0.0.1"), &f.config, at(61)),
            Err(SessionError::DeadlineExceeded)
        ));
        assert_eq!(f.last("10.0.0.1"), 2);
        assert_eq!(f.engine.store().snapshot_results(None, true, true).len(), 1);
        assert!(f.engine.store().snapshot_results(None, true, false).is_empty());
    }

    #[test]
    fn bank_reload_keeps_length() {
        let f = fixture(QuestionBank::synthetic(5));
        assert!(f.engine.replace_bank(QuestionBank::synthetic(6)).is_err());
        f.engine.replace_bank(QuestionBank::synthetic(5)).unwrap();
        assert!(SessionEngine::new(Arc::new(Store::in_memory()), QuestionBank::synthetic(0)).is_err());
    }
}
