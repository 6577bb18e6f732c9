//! Authenticated control plane: status, campaign parameters, teacher roster.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::Duration;
use parking_lot::Mutex;
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::bank::{BankError, QuestionBank};
use crate::model::{CampaignConfig, ClientIp, ConfigError, InvalidTeacher, SessionMode, Teacher, TeacherId, Timestamp};
use crate::session::{check_deadline, DeadlineStatus, SessionEngine};
use crate::store::{AuditEntry, StoreError, StoreHealth, TeacherEntry};

pub const DEFAULT_TOKEN_TTL_MINUTES: i64 = 30;
const RECENT_CHANGES: usize = 10;

#[derive(Debug, Error)]
pub enum AdminError {
    #[error("unauthorized")]
    Unauthorized,
    #[error("an active campaign needs a current teacher")]
    NoTeacherSelected,
    #[error("invalid address: {0:?}")]
    InvalidAddress(String),
    #[error("deadline must be a positive number of seconds")]
    InvalidDeadline,
    #[error("teacher {0} is being evaluated by the active campaign")]
    TeacherInUse(TeacherId),
    #[error("no selectable teacher {0}")]
    TeacherNotFound(TeacherId),
    #[error(transparent)]
    InvalidTeacher(#[from] InvalidTeacher),
    #[error("no question bank file configured")]
    NoBankSource,
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Store(StoreError),
}

impl From<StoreError> for AdminError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Config(ConfigError::NoTeacherSelected) => AdminError::NoTeacherSelected,
            StoreError::Config(ConfigError::InvalidDeadline) => AdminError::InvalidDeadline,
            StoreError::TeacherInUse(id) => AdminError::TeacherInUse(id),
            StoreError::UnknownTeacher(id) => AdminError::TeacherNotFound(id),
            other => AdminError::Store(other),
        }
    }
}

impl From<ConfigError> for AdminError {
    fn from(e: ConfigError) -> Self {
        AdminError::from(StoreError::Config(e))
    }
}

#[derive(Clone, Serialize, Deserialize)]
pub struct AdminCredential {
    pub username: String,
    pub password: String,
}

impl std::fmt::Debug for AdminCredential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdminCredential").field("username", &self.username).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdminToken {
    pub token: String,
    pub expires_at: Timestamp,
}

/// Partial update of the campaign parameters. Absent fields are unchanged;
/// `deadline_seconds: null` clears the deadline.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_teacher: Option<TeacherId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowlist: Option<Vec<String>>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub deadline_seconds: Option<Option<u64>>,
}

fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<u64>>, D::Error> {
    Option::<u64>::deserialize(d).map(Some)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherInput {
    #[serde(default)]
    pub id: Option<String>,
    pub display_name: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCounts {
    pub official: usize,
    pub demo: usize,
    pub completed: usize,
    pub in_progress: usize,
    /// Incomplete sessions frozen by the deadline.
    pub expired: usize,
}

/// Where a respondent is and how far they got. Carries no answer values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RespondentLocation {
    pub client_ip: ClientIp,
    pub teacher_id: TeacherId,
    pub mode: SessionMode,
    pub answered: u32,
    pub total: u32,
    pub completed: bool,
    pub expired: bool,
    pub started_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusReport {
    pub active: bool,
    pub current_teacher: Option<String>,
    pub current_teacher_id: Option<TeacherId>,
    pub deadline_seconds: Option<u64>,
    pub allowlist: Vec<ClientIp>,
    pub question_count: u32,
    pub session_counts: SessionCounts,
    pub respondent_locations: Vec<RespondentLocation>,
    pub store: StoreHealth,
    pub recent_changes: Vec<AuditEntry>,
}

struct TokenEntry {
    username: String,
    expires_at: Timestamp,
}

pub struct AdminService {
    engine: Arc<SessionEngine>,
    tokens: Mutex<HashMap<String, TokenEntry>>,
    ttl: Duration,
    bank_source: Option<PathBuf>,
}

impl AdminService {
    pub fn new(engine: Arc<SessionEngine>) -> AdminService {
        AdminService {
            engine,
            tokens: Mutex::new(HashMap::new()),
            ttl: Duration::minutes(DEFAULT_TOKEN_TTL_MINUTES),
            bank_source: None,
        }
    }

    pub fn with_token_ttl(mut self, ttl: Duration) -> Self {
        self.ttl = ttl;
        self
    }

    pub fn with_bank_source(mut self, path: Option<PathBuf>) -> Self {
        self.bank_source = path;
        self
    }

    pub fn engine(&self) -> &Arc<SessionEngine> {
        &self.engine
    }

    /// Same error for a wrong username and a wrong password.
    pub fn authenticate(&self, cred: &AdminCredential, now: Timestamp) -> Result<AdminToken, AdminError> {
        let config = self.engine.store().config();
        let user_ok: bool =
            subtle::ConstantTimeEq::ct_eq(cred.username.as_bytes(), config.admin_username.as_bytes()).into();
        let pass_ok = config.admin_password_hash.as_ref().is_some_and(|h| h.verify(&cred.password));
        if !(user_ok && pass_ok) || config.admin_username.is_empty() {
            return Err(AdminError::Unauthorized);
        }

        let mut bytes = [0u8; 32];
        rand::rng().fill_bytes(&mut bytes);
        let token = hex::encode(bytes);
        let expires_at = now + self.ttl;
        let mut tokens = self.tokens.lock();
        tokens.retain(|_, t| t.expires_at > now);
        tokens.insert(token.clone(), TokenEntry { username: cred.username.clone(), expires_at });
        Ok(AdminToken { token, expires_at })
    }

    /// Checks a token and slides its expiry. Returns the admin username.
    pub fn authorize(&self, token: &str, now: Timestamp) -> Result<String, AdminError> {
        let mut tokens = self.tokens.lock();
        match tokens.get_mut(token) {
            Some(entry) if entry.expires_at > now => {
                entry.expires_at = now + self.ttl;
                Ok(entry.username.clone())
            }
            Some(_) => {
                tokens.remove(token);
                Err(AdminError::Unauthorized)
            }
            None => Err(AdminError::Unauthorized),
        }
    }

    pub fn logout(&self, token: &str) {
        self.tokens.lock().remove(token);
    }

    pub fn view_status(&self, token: &str, now: Timestamp) -> Result<StatusReport, AdminError> {
        self.authorize(token, now)?;
        let store = self.engine.store();
        let config = store.config();
        let mut counts = SessionCounts::default();
        let mut respondent_locations = Vec::new();
        for s in store.sessions() {
            let expired = !s.is_complete() && check_deadline(&s, &config, now) == DeadlineStatus::Exceeded;
            match s.mode {
                SessionMode::Official => counts.official += 1,
                SessionMode::Demo => counts.demo += 1,
                SessionMode::Closed => {}
            }
            if s.is_complete() {
                counts.completed += 1;
            } else if expired {
                counts.expired += 1;
            } else {
                counts.in_progress += 1;
            }
            respondent_locations.push(RespondentLocation {
                client_ip: s.client_ip,
                teacher_id: s.teacher_id.clone(),
                mode: s.mode,
                answered: s.last_answered,
                total: s.total,
                completed: s.is_complete(),
                expired,
                started_at: s.started_at,
            });
        }
        respondent_locations.sort_by_key(|r| std::cmp::Reverse(r.started_at));
        let current_teacher =
            config.current_teacher.as_ref().and_then(|id| store.teacher(id)).map(|t| t.teacher.display_name);
        let mut recent_changes = store.audit_log();
        recent_changes.reverse();
        recent_changes.truncate(RECENT_CHANGES);
        Ok(StatusReport {
            active: config.active,
            current_teacher,
            current_teacher_id: config.current_teacher.clone(),
            deadline_seconds: config.deadline_seconds,
            allowlist: config.allowlist.iter().copied().collect(),
            question_count: self.engine.question_count(),
            session_counts: counts,
            respondent_locations,
            store: store.health(),
            recent_changes,
        })
    }

    pub fn set_parameters(
        &self,
        token: &str,
        update: ParameterUpdate,
        now: Timestamp,
    ) -> Result<Arc<CampaignConfig>, AdminError> {
        let by = self.authorize(token, now)?;
        let allowlist = match &update.allowlist {
            Some(entries) => Some(
                entries
                    .iter()
                    .map(|e| ClientIp::parse(e).map_err(|_| AdminError::InvalidAddress(e.clone())))
                    .collect::<Result<_, _>>()?,
            ),
            None => None,
        };
        self.engine.store().update_config(&by, now, |current, teachers| {
            let mut next = current.clone();
            if let Some(id) = &update.current_teacher {
                if !teachers.get(id).is_some_and(|t| !t.hidden) {
                    return Err(AdminError::TeacherNotFound(id.clone()));
                }
                next.current_teacher = Some(id.clone());
            }
            if let Some(active) = update.active {
                next.active = active;
            }
            if let Some(list) = allowlist {
                next.allowlist = list;
            }
            if let Some(deadline) = update.deadline_seconds {
                next.deadline_seconds = deadline;
            }
            next.validate()?;
            Ok(next)
        })
    }

    pub fn list_teachers(
        &self,
        token: &str,
        include_hidden: bool,
        now: Timestamp,
    ) -> Result<Vec<TeacherEntry>, AdminError> {
        self.authorize(token, now)?;
        Ok(self.engine.store().teachers().into_iter().filter(|t| include_hidden || !t.hidden).collect())
    }

    pub fn upsert_teacher(&self, token: &str, input: TeacherInput, now: Timestamp) -> Result<Teacher, AdminError> {
        self.authorize(token, now)?;
        let id = match input.id {
            Some(id) => TeacherId::new(id)?,
            None => TeacherId::generate(),
        };
        let teacher = Teacher::new(id, input.display_name)?;
        self.engine.store().upsert_teacher(teacher.clone())?;
        Ok(teacher)
    }

    pub fn remove_teacher(&self, token: &str, id: &TeacherId, now: Timestamp) -> Result<(), AdminError> {
        self.authorize(token, now)?;
        Ok(self.engine.store().remove_teacher(id)?)
    }

    /// Re-reads the question bank file. Returns the number of items loaded.
    pub fn reload_bank(&self, token: &str, now: Timestamp) -> Result<usize, AdminError> {
        self.authorize(token, now)?;
        let path = self.bank_source.as_ref().ok_or(AdminError::NoBankSource)?;
        let bank = QuestionBank::from_file(path, self.engine.question_count() as usize)?;
        let n = bank.len();
        self.engine.replace_bank(bank)?;
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::PasswordHash;
    use crate::model::now_utc;
    use crate::store::Store;

    fn service() -> AdminService {
        let store = Arc::new(Store::in_memory());
        store.set_admin_credentials("admin", Some(PasswordHash::with_salt("s3cret", [1; 16], 2)));
        let engine = Arc::new(SessionEngine::new(store, QuestionBank::synthetic(4)).unwrap());
        AdminService::new(engine)
    }

    fn login(svc: &AdminService) -> String {
        svc.authenticate(&AdminCredential { username: "admin".into(), password: "s3cret".into() }, now_utc())
            .unwrap()
            .token
    }

    #[test]
    fn wrong_username_and_password_look_the_same() {
        let svc = service();
        let now = now_utc();
        let bad_user = svc.authenticate(&AdminCredential { username: "root".into(), password: "s3cret".into() }, now);
        let bad_pass = svc.authenticate(&AdminCredential { username: "admin".into(), password: "nope".into() }, now);
        assert_eq!(bad_user.unwrap_err().to_string(), bad_pass.unwrap_err().to_string());
    }

    #[test]
    fn tokens_slide_and_expire() {
        let svc = service().with_token_ttl(Duration::seconds(60));
        let t0 = now_utc();
        let token = svc
            .authenticate(&AdminCredential { username: "admin".into(), password: "s3cret".into() }, t0)
            .unwrap()
            .token;
        svc.authorize(&token, t0 + Duration::seconds(50)).unwrap();
        svc.authorize(&token, t0 + Duration::seconds(100)).unwrap();
        assert!(matches!(svc.authorize(&token, t0 + Duration::seconds(200)), Err(AdminError::Unauthorized)));
        assert!(matches!(svc.authorize("garbage", t0), Err(AdminError::Unauthorized)));
    }

    #[test]
    fn logout_revokes() {
        let svc = service();
        let token = login(&svc);
        svc.logout(&token);
        assert!(svc.view_status(&token, now_utc()).is_err());
    }

    #[test]
    fn parameter_rules() {
        let svc = service();
        let token = login(&svc);
        let now = now_utc();
        let err =
            svc.set_parameters(&token, ParameterUpdate { active: Some(true), ..Default::default() }, now).unwrap_err();
        assert!(matches!(err, AdminError::NoTeacherSelected));

        let err = svc
            .set_parameters(
                &token,
                ParameterUpdate { allowlist: Some(vec!["10.0.0.1".into(), "10.0.0.300".into()]), ..Default::default() },
                now,
            )
            .unwrap_err();
        assert!(matches!(err, AdminError::InvalidAddress(a) if a == "10.0.0.300"));

        let t = svc
            .upsert_teacher(
                &token,
                TeacherInput { id: Some("karn".into()), display_name: "Conf.dr. Tiberiu Marius Karnyanszky".into() },
                now,
            )
            .unwrap();
        let cfg = svc
            .set_parameters(
                &token,
                ParameterUpdate {
                    active: Some(true),
                    current_teacher: Some(t.id.clone()),
                    allowlist: Some(vec!["::ffff:10.0.0.1".into()]),
                    deadline_seconds: Some(Some(1800)),
                },
                now,
            )
            .unwrap();
        assert!(cfg.active);
        assert_eq!(cfg.allowlist.iter().next().unwrap().to_string(), "10.0.0.1");
        assert_eq!(cfg.deadline_seconds, Some(1800));

        let cfg = svc
            .set_parameters(&token, ParameterUpdate { deadline_seconds: Some(None), ..Default::default() }, now)
            .unwrap();
        assert_eq!(cfg.deadline_seconds, None);
        assert!(cfg.active);
        assert!(matches!(
            svc.set_parameters(&token, ParameterUpdate { deadline_seconds: Some(Some(0)), ..Default::default() }, now),
            Err(AdminError::InvalidDeadline)
        ));
        assert!(matches!(
            svc.set_parameters(
                &token,
                ParameterUpdate { current_teacher: Some(TeacherId::new("ghost").unwrap()), ..Default::default() },
                now
            ),
            Err(AdminError::TeacherNotFound(_))
        ));
    }

    #[test]
    fn deadline_field_tristate() {
        let absent: ParameterUpdate = serde_json::from_str("{}").unwrap();
        assert_eq!(absent.deadline_seconds, None);
        let cleared: ParameterUpdate = serde_json::from_str(r#"{"deadline_seconds":null}"#).unwrap();
        assert_eq!(cleared.deadline_seconds, Some(None));
        let set: ParameterUpdate = serde_json::from_str(r#"{"deadline_seconds":90}"#).unwrap();
        assert_eq!(set.deadline_seconds, Some(Some(90)));
    }

    #[test]
    fn roster_management() {
        let svc = service();
        let token = login(&svc);
        let now = now_utc();
        let a = svc
            .upsert_teacher(
                &token,
                TeacherInput { id: None, display_name: "Conf.dr. Tiberiu Marius Karnyanszky".into() },
                now,
            )
            .unwrap();
        let b = svc
            .upsert_teacher(
                &token,
                TeacherInput { id: Some("luca".into()), display_name: "Conf. dr. Lucian Luca".into() },
                now,
            )
            .unwrap();
        let names: Vec<_> =
            svc.list_teachers(&token, false, now).unwrap().into_iter().map(|t| t.teacher.display_name).collect();
        assert!(names.contains(&a.display_name) && names.contains(&b.display_name));

        svc.set_parameters(
            &token,
            ParameterUpdate { active: Some(true), current_teacher: Some(b.id.clone()), ..Default::default() },
            now,
        )
        .unwrap();
        assert!(matches!(svc.remove_teacher(&token, &b.id, now), Err(AdminError::TeacherInUse(_))));
        svc.remove_teacher(&token, &a.id, now).unwrap();
        assert_eq!(svc.list_teachers(&token, false, now).unwrap().len(), 1);
        assert_eq!(svc.list_teachers(&token, true, now).unwrap().len(), 2);
        assert!(matches!(
            svc.upsert_teacher(&token, TeacherInput { id: Some("x".into()), display_name: " ".into() }, now),
            Err(AdminError::InvalidTeacher(_))
        ));
    }

    #[test]
    fn status_hides_answers() {
        let svc = service();
        let token = login(&svc);
        let now = now_utc();
        let empty = svc.view_status(&token, now).unwrap();
        assert!(!empty.active);
        assert_eq!(empty.session_counts, SessionCounts::default());

        let t = svc
            .upsert_teacher(
                &token,
                TeacherInput { id: Some("t".into()), display_name: "Conf. dr. Lucian Luca".into() },
                now,
            )
            .unwrap();
        svc.set_parameters(
            &token,
            ParameterUpdate { active: Some(true), current_teacher: Some(t.id.clone()), ..Default::default() },
            now,
        )
        .unwrap();
        let ip = ClientIp::parse("192.0.2.9").unwrap();
        let config = svc.engine().store().config();
        svc.engine().open_or_resume(&ip, &config, now).unwrap();
        svc.engine().submit_answer(&ip, &t.id, 1, Some(5), &config, now).unwrap();

        let report = svc.view_status(&token, now).unwrap();
        assert_eq!(report.current_teacher.as_deref(), Some("Conf. dr. Lucian Luca"));
        assert_eq!(report.session_counts.demo, 1);
        assert_eq!(report.session_counts.in_progress, 1);
        assert_eq!(report.respondent_locations[0].client_ip, ip);
        assert_eq!(report.respondent_locations[0].answered, 1);
        let json = serde_json::to_value(&report).unwrap();
        let loc = json["respondent_locations"][0].as_object().unwrap();
        assert!(!loc.contains_key("value") && !loc.contains_key("answers") && !loc.contains_key("raw"));
        assert!(!serde_json::to_string(&report).unwrap().contains("foarte"));
    }

    #[test]
    fn unauthorized_calls_mutate_nothing() {
        let svc = service();
        let now = now_utc();
        assert!(svc
            .upsert_teacher("nope", TeacherInput { id: Some("t".into()), display_name: "X".into() }, now)
            .is_err());
        assert!(svc
            .set_parameters("nope", ParameterUpdate { deadline_seconds: Some(Some(5)), ..Default::default() }, now)
            .is_err());
        assert!(svc.engine().store().teachers().is_empty());
        assert_eq!(svc.engine().store().config().deadline_seconds, None);
        assert!(svc.engine().store().audit_log().is_empty());
    }

    #[test]
    fn reload_needs_a_source() {
        let svc = service();
        let token = login(&svc);
        assert!(matches!(svc.reload_bank(&token, now_utc()), Err(AdminError::NoBankSource)));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.json");
        std::fs::write(&path, serde_json::to_string(QuestionBank::synthetic(4).items()).unwrap()).unwrap();
        let svc = svc.with_bank_source(Some(path.clone()));
        assert_eq!(svc.reload_bank(&token, now_utc()).unwrap(), 4);
        std::fs::write(&path, serde_json::to_string(QuestionBank::synthetic(3).items()).unwrap()).unwrap();
        assert!(matches!(svc.reload_bank(&token, now_utc()), Err(AdminError::Bank(_))));
    }
}
