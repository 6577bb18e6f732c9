//! Durable state: campaign configuration, teacher roster, sessions and
//! answers.
//!
//! All state lives in memory behind a single lock and every mutation is
//! written to the journal before it is applied, so a reopened store replays
//! to exactly the last acknowledged write. One lock gives per-session
//! serialization and point-in-time reads for free.

mod journal;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auth::PasswordHash;
use crate::model::{
    AnswerRecord, AnswerValue, CampaignConfig, ClientIp, ConfigError, EvaluationSession, SessionKey, SessionMode,
    Teacher, TeacherId, Timestamp,
};

use journal::Journal;
pub use journal::SyncPolicy;

pub const SCHEMA_NAME: &str = "teval-store";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    /// The write lost a race with a concurrent write to the same session.
    #[error("conflicting concurrent write, retry")]
    ConflictRetry,
    #[error("no such session")]
    UnknownSession,
    #[error("session already exists")]
    SessionExists,
    #[error("session is already complete")]
    SessionComplete,
    #[error("unknown teacher {0}")]
    UnknownTeacher(TeacherId),
    #[error("teacher {0} is being evaluated by the active campaign")]
    TeacherInUse(TeacherId),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("storage failure: {0}")]
    StorageFailure(#[from] std::io::Error),
    #[error("cannot encode record: {0}")]
    Encode(String),
    #[error("store corrupt at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("store schema mismatch: found {found}, expected {SCHEMA_NAME} v{SCHEMA_VERSION}")]
    SchemaMismatch { found: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub(crate) enum Record {
    Header { schema: String, version: u32 },
    ConfigChanged { by: String, at: Timestamp, config: CampaignConfig },
    TeacherUpserted { teacher: Teacher },
    TeacherRemoved { id: TeacherId },
    SessionOpened { session: EvaluationSession },
    AnswerRecorded { answer: AnswerRecord },
    Purged { keys: Vec<SessionKey> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherEntry {
    pub teacher: Teacher,
    /// Removed from selection; kept so historical results still resolve.
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub by: String,
    pub at: Timestamp,
    pub config: CampaignConfig,
}

/// A stored questionnaire as read by the results plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultRecord {
    pub questionnaire_no: Option<u64>,
    pub mode: SessionMode,
    pub teacher: Teacher,
    pub started_at: Timestamp,
    pub completed_at: Option<Timestamp>,
    pub answers: Vec<AnswerValue>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub sessions: usize,
    pub answers: usize,
    pub violations: Vec<String>,
}

impl IntegrityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreHealth {
    pub backend: String,
    pub path: Option<PathBuf>,
    pub schema_version: u32,
    pub records: u64,
    pub bytes: u64,
    /// Bytes of an interrupted final write dropped when the store was opened.
    pub recovered_tail_bytes: u64,
    pub sessions: usize,
    pub answers: usize,
    pub integrity_ok: bool,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone)]
struct SessionEntry {
    session: EvaluationSession,
    answers: Vec<AnswerRecord>,
    questionnaire_no: Option<u64>,
}

#[derive(Debug, Clone, Default)]
struct State {
    config: Arc<CampaignConfig>,
    teachers: BTreeMap<TeacherId, TeacherEntry>,
    sessions: BTreeMap<SessionKey, SessionEntry>,
    next_questionnaire_no: u64,
    audit: Vec<AuditEntry>,
}

impl State {
    fn new() -> State {
        State { next_questionnaire_no: 1, ..State::default() }
    }

    fn selectable(&self, id: &TeacherId) -> bool {
        self.teachers.get(id).is_some_and(|t| !t.hidden)
    }

    /// Validates a record against the current state without applying it.
    fn check(&self, record: &Record) -> Result<(), StoreError> {
        match record {
            Record::Header { .. } => Err(StoreError::InvalidRecord("header after first line".into())),
            Record::ConfigChanged { config, .. } => {
                config.validate()?;
                match &config.current_teacher {
                    Some(id) if !self.selectable(id) => Err(StoreError::UnknownTeacher(id.clone())),
                    _ => Ok(()),
                }
            }
            Record::TeacherUpserted { teacher } => {
                if teacher.display_name.trim().is_empty() {
                    return Err(StoreError::InvalidRecord("empty teacher name".into()));
                }
                Ok(())
            }
            Record::TeacherRemoved { id } => {
                if !self.selectable(id) {
                    return Err(StoreError::UnknownTeacher(id.clone()));
                }
                if self.config.active && self.config.current_teacher.as_ref() == Some(id) {
                    return Err(StoreError::TeacherInUse(id.clone()));
                }
                Ok(())
            }
            Record::SessionOpened { session } => {
                if self.sessions.contains_key(&session.key()) {
                    return Err(StoreError::SessionExists);
                }
                if !self.teachers.contains_key(&session.teacher_id) {
                    return Err(StoreError::UnknownTeacher(session.teacher_id.clone()));
                }
                if session.mode == SessionMode::Closed
                    || session.last_answered != 0
                    || session.total == 0
                    || session.completed_at.is_some()
                {
                    return Err(StoreError::InvalidRecord("malformed new session".into()));
                }
                Ok(())
            }
            Record::AnswerRecorded { answer } => {
                let key = SessionKey::new(answer.client_ip, answer.teacher_id.clone());
                let entry = self.sessions.get(&key).ok_or(StoreError::UnknownSession)?;
                if entry.session.is_complete() {
                    return Err(StoreError::SessionComplete);
                }
                if answer.question_index != entry.session.last_answered + 1 {
                    return Err(StoreError::ConflictRetry);
                }
                Ok(())
            }
            Record::Purged { keys } => {
                if keys.iter().all(|k| self.sessions.contains_key(k)) {
                    Ok(())
                } else {
                    Err(StoreError::UnknownSession)
                }
            }
        }
    }

    fn apply(&mut self, record: Record) {
        match record {
            Record::Header { .. } => {}
            Record::ConfigChanged { by, at, config } => {
                let mut config = config;
                // Credentials are process-level; keep the ones currently installed.
                config.admin_username = self.config.admin_username.clone();
                config.admin_password_hash = self.config.admin_password_hash.clone();
                self.audit.push(AuditEntry { by, at, config: config.clone() });
                self.config = Arc::new(config);
            }
            Record::TeacherUpserted { teacher } => {
                self.teachers.insert(teacher.id.clone(), TeacherEntry { teacher, hidden: false });
            }
            Record::TeacherRemoved { id } => {
                if let Some(t) = self.teachers.get_mut(&id) {
                    t.hidden = true;
                }
            }
            Record::SessionOpened { session } => {
                self.sessions
                    .insert(session.key(), SessionEntry { session, answers: Vec::new(), questionnaire_no: None });
            }
            Record::AnswerRecorded { answer } => {
                let key = SessionKey::new(answer.client_ip, answer.teacher_id.clone());
                if let Some(entry) = self.sessions.get_mut(&key) {
                    entry.session.last_answered = answer.question_index;
                    if entry.session.last_answered == entry.session.total {
                        entry.session.completed_at = Some(answer.answered_at);
                        entry.questionnaire_no = Some(self.next_questionnaire_no);
                        self.next_questionnaire_no += 1;
                    }
                    entry.answers.push(answer);
                }
            }
            Record::Purged { keys } => {
                for k in keys {
                    self.sessions.remove(&k);
                }
            }
        }
    }

    fn result_record(&self, entry: &SessionEntry) -> ResultRecord {
        let teacher = self.teachers.get(&entry.session.teacher_id).map(|t| t.teacher.clone()).unwrap_or_else(|| {
            Teacher { id: entry.session.teacher_id.clone(), display_name: entry.session.teacher_id.to_string() }
        });
        ResultRecord {
            questionnaire_no: entry.questionnaire_no,
            mode: entry.session.mode,
            teacher,
            started_at: entry.session.started_at,
            completed_at: entry.session.completed_at,
            answers: entry.answers.iter().map(|a| a.value).collect(),
        }
    }

    fn integrity(&self) -> IntegrityReport {
        let mut report = IntegrityReport { sessions: self.sessions.len(), ..Default::default() };
        let mut numbers = std::collections::BTreeSet::new();
        for (key, entry) in &self.sessions {
            let s = &entry.session;
            let tag = format!("{}/{}", key.client_ip, key.teacher_id);
            report.answers += entry.answers.len();
            if s.key() != *key {
                report.violations.push(format!("{tag}: session stored under a foreign key"));
            }
            if s.last_answered > s.total {
                report.violations.push(format!("{tag}: last_answered {} > total {}", s.last_answered, s.total));
            }
            if entry.answers.len() != s.last_answered as usize {
                report.violations.push(format!(
                    "{tag}: {} answers stored, last_answered is {}",
                    entry.answers.len(),
                    s.last_answered
                ));
            }
            for (pos, a) in entry.answers.iter().enumerate() {
                if a.question_index as usize != pos + 1 {
                    report.violations.push(format!(
                        "{tag}: answer at position {} has index {}",
                        pos + 1,
                        a.question_index
                    ));
                }
                if a.client_ip != key.client_ip || a.teacher_id != key.teacher_id {
                    report.violations.push(format!("{tag}: answer {} references another session", a.question_index));
                }
            }
            if s.completed_at.is_some() != (s.last_answered == s.total) {
                report.violations.push(format!("{tag}: completion flag disagrees with progress"));
            }
            if entry.questionnaire_no.is_some() != s.completed_at.is_some() {
                report.violations.push(format!("{tag}: questionnaire number disagrees with completion"));
            }
            if let Some(no) = entry.questionnaire_no {
                if !numbers.insert(no) {
                    report.violations.push(format!("{tag}: questionnaire number {no} reused"));
                }
            }
            if s.mode == SessionMode::Closed {
                report.violations.push(format!("{tag}: closed-mode session persisted"));
            }
            if !self.teachers.contains_key(&s.teacher_id) {
                report.violations.push(format!("{tag}: references unknown teacher"));
            }
        }
        report
    }
}

struct Inner {
    state: State,
    journal: Option<Journal>,
    recovered_tail_bytes: u64,
}

impl Inner {
    fn commit(&mut self, record: Record) -> Result<(), StoreError> {
        self.state.check(&record)?;
        if let Some(journal) = self.journal.as_mut() {
            journal.append(&record)?;
        }
        self.state.apply(record);
        Ok(())
    }
}

pub struct Store {
    inner: Mutex<Inner>,
}

impl Store {
    /// A store without durable backing, for tests and throwaway runs.
    pub fn in_memory() -> Store {
        Store { inner: Mutex::new(Inner { state: State::new(), journal: None, recovered_tail_bytes: 0 }) }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Store, StoreError> {
        Store::open_with(path, SyncPolicy::default())
    }

    /// Opens or creates the store file and replays it.
    pub fn open_with(path: impl AsRef<Path>, sync: SyncPolicy) -> Result<Store, StoreError> {
        let recovered = Journal::open(path.as_ref(), sync)?;
        let mut state = State::new();
        for (line, record) in recovered.records {
            state.check(&record).map_err(|e| StoreError::Corrupt { line, reason: e.to_string() })?;
            state.apply(record);
        }
        Ok(Store {
            inner: Mutex::new(Inner {
                state,
                journal: Some(recovered.journal),
                recovered_tail_bytes: recovered.truncated_bytes,
            }),
        })
    }

    pub fn path(&self) -> Option<PathBuf> {
        self.inner.lock().journal.as_ref().map(|j| j.path().to_owned())
    }

    pub fn config(&self) -> Arc<CampaignConfig> {
        self.inner.lock().state.config.clone()
    }

    /// Installs process-level admin credentials. Not journaled.
    pub fn set_admin_credentials(&self, username: &str, hash: Option<PasswordHash>) {
        let mut inner = self.inner.lock();
        let mut config = (*inner.state.config).clone();
        config.admin_username = username.to_owned();
        config.admin_password_hash = hash;
        inner.state.config = Arc::new(config);
    }

    /// Read-modify-write of the campaign configuration as one atomic step.
    pub fn update_config<E>(
        &self,
        by: &str,
        at: Timestamp,
        change: impl FnOnce(&CampaignConfig, &BTreeMap<TeacherId, TeacherEntry>) -> Result<CampaignConfig, E>,
    ) -> Result<Arc<CampaignConfig>, E>
    where
        E: From<StoreError>,
    {
        let mut inner = self.inner.lock();
        let config = change(&inner.state.config, &inner.state.teachers)?;
        inner.commit(Record::ConfigChanged { by: by.to_owned(), at, config })?;
        Ok(inner.state.config.clone())
    }

    pub fn audit_log(&self) -> Vec<AuditEntry> {
        self.inner.lock().state.audit.clone()
    }

    pub fn teacher(&self, id: &TeacherId) -> Option<TeacherEntry> {
        self.inner.lock().state.teachers.get(id).cloned()
    }

    pub fn teachers(&self) -> Vec<TeacherEntry> {
        self.inner.lock().state.teachers.values().cloned().collect()
    }

    pub fn upsert_teacher(&self, teacher: Teacher) -> Result<(), StoreError> {
        self.inner.lock().commit(Record::TeacherUpserted { teacher })
    }

    /// Hides a teacher from selection.
    pub fn remove_teacher(&self, id: &TeacherId) -> Result<(), StoreError> {
        self.inner.lock().commit(Record::TeacherRemoved { id: id.clone() })
    }

    pub fn session(&self, key: &SessionKey) -> Option<EvaluationSession> {
        self.inner.lock().state.sessions.get(key).map(|e| e.session.clone())
    }

    pub fn answers(&self, key: &SessionKey) -> Vec<AnswerRecord> {
        self.inner.lock().state.sessions.get(key).map(|e| e.answers.clone()).unwrap_or_default()
    }

    pub fn questionnaire_no(&self, key: &SessionKey) -> Option<u64> {
        self.inner.lock().state.sessions.get(key).and_then(|e| e.questionnaire_no)
    }

    pub fn sessions(&self) -> Vec<EvaluationSession> {
        self.inner.lock().state.sessions.values().map(|e| e.session.clone()).collect()
    }

    /// Returns the existing session for `key`, creating it first if absent.
    pub fn open_session(
        &self,
        key: &SessionKey,
        mode: SessionMode,
        total: u32,
        now: Timestamp,
    ) -> Result<EvaluationSession, StoreError> {
        let mut inner = self.inner.lock();
        if let Some(entry) = inner.state.sessions.get(key) {
            return Ok(entry.session.clone());
        }
        let session = EvaluationSession {
            client_ip: key.client_ip,
            teacher_id: key.teacher_id.clone(),
            last_answered: 0,
            total,
            mode,
            started_at: now,
            completed_at: None,
        };
        inner.commit(Record::SessionOpened { session: session.clone() })?;
        Ok(session)
    }

    /// Stores one answer and advances the session in a single record.
    ///
    /// Fails with [`StoreError::ConflictRetry`] unless `question_index` is
    /// exactly one past the persisted progress.
    pub fn record_answer_and_advance(
        &self,
        key: &SessionKey,
        question_index: u32,
        value: AnswerValue,
        now: Timestamp,
    ) -> Result<u32, StoreError> {
        let mut inner = self.inner.lock();
        inner.commit(Record::AnswerRecorded {
            answer: AnswerRecord {
                client_ip: key.client_ip,
                teacher_id: key.teacher_id.clone(),
                question_index,
                value,
                answered_at: now,
            },
        })?;
        Ok(question_index)
    }

    /// Deletes every demo-mode session of `ip` with its answers. Returns the
    /// number of answer records removed.
    pub fn purge_ip(&self, ip: &ClientIp) -> Result<usize, StoreError> {
        let mut inner = self.inner.lock();
        let victims: Vec<_> = inner
            .state
            .sessions
            .iter()
            .filter(|(k, e)| k.client_ip == *ip && e.session.mode == SessionMode::Demo)
            .map(|(k, e)| (k.clone(), e.answers.len()))
            .collect();
        if victims.is_empty() {
            return Ok(0);
        }
        let count = victims.iter().map(|(_, n)| n).sum();
        inner.commit(Record::Purged { keys: victims.into_iter().map(|(k, _)| k).collect() })?;
        Ok(count)
    }

    /// Point-in-time read of stored questionnaires, newest completion first.
    pub fn snapshot_results(
        &self,
        teacher: Option<&TeacherId>,
        include_demo: bool,
        include_incomplete: bool,
    ) -> Vec<ResultRecord> {
        let inner = self.inner.lock();
        let state = &inner.state;
        let mut rows: Vec<ResultRecord> = state
            .sessions
            .values()
            .filter(|e| teacher.is_none_or(|t| &e.session.teacher_id == t))
            .filter(|e| include_demo || e.session.mode != SessionMode::Demo)
            .filter(|e| include_incomplete || e.session.is_complete())
            .map(|e| state.result_record(e))
            .collect();
        drop(inner);
        rows.sort_by(|a, b| {
            // Completed rows first, newest first; incomplete rows by start time.
            b.completed_at
                .cmp(&a.completed_at)
                .then(b.questionnaire_no.cmp(&a.questionnaire_no))
                .then(b.started_at.cmp(&a.started_at))
        });
        rows
    }

    pub fn result_by_number(&self, questionnaire_no: u64) -> Option<ResultRecord> {
        let inner = self.inner.lock();
        inner
            .state
            .sessions
            .values()
            .find(|e| e.questionnaire_no == Some(questionnaire_no))
            .map(|e| inner.state.result_record(e))
    }

    pub fn integrity_scan(&self) -> IntegrityReport {
        self.inner.lock().state.integrity()
    }

    pub fn health(&self) -> StoreHealth {
        let inner = self.inner.lock();
        let report = inner.state.integrity();
        let (backend, path, records, bytes) = match &inner.journal {
            Some(j) => ("journal", Some(j.path().to_owned()), j.records(), j.len()),
            None => ("memory", None, 0, 0),
        };
        StoreHealth {
            backend: backend.into(),
            path,
            schema_version: SCHEMA_VERSION,
            records,
            bytes,
            recovered_tail_bytes: inner.recovered_tail_bytes,
            sessions: report.sessions,
            answers: report.answers,
            integrity_ok: report.is_ok(),
            violations: report.violations,
        }
    }
}
