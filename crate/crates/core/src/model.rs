//! Domain types shared by the session engine, the store, the admin plane and
//! the results plane. Every constructor here validates its input; values are
//! immutable once built.

use std::collections::BTreeSet;
use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auth::PasswordHash;

/// Length of the standard questionnaire.
pub const DEFAULT_QUESTION_COUNT: usize = 58;

/// UTC timestamps with second precision.
pub type Timestamp = DateTime<Utc>;

pub fn now_utc() -> Timestamp {
    Utc::now().trunc_subsecs(0)
}

/// The five Likert labels, indexed by `raw - 1`.
pub const LIKERT_LABELS: [&str; 5] =
    ["foarte puțin sau deloc", "puțin", "nici prea mult, nici prea puțin", "mult", "foarte mult"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("answer value {0} is outside 1..=5")]
pub struct OutOfRange(pub i64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid address: {0:?}")]
pub struct InvalidAddress(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid teacher: {0}")]
pub struct InvalidTeacher(pub String);

/// Scoring direction of a questionnaire item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Direct,
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub index: u32,
    pub text: String,
    pub direction: Direction,
    /// Optional media slot shown next to the item text. Unused by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_url: Option<String>,
}

/// A validated Likert response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "AnswerValueRepr", into = "AnswerValueRepr")]
pub struct AnswerValue(u8);

#[derive(Serialize, Deserialize)]
struct AnswerValueRepr {
    raw: i64,
    #[serde(default)]
    label: Option<String>,
}

impl TryFrom<AnswerValueRepr> for AnswerValue {
    type Error = OutOfRange;

    fn try_from(repr: AnswerValueRepr) -> Result<Self, Self::Error> {
        make_answer_value(repr.raw)
    }
}

impl From<AnswerValue> for AnswerValueRepr {
    fn from(v: AnswerValue) -> Self {
        AnswerValueRepr { raw: i64::from(v.0), label: Some(v.label().to_owned()) }
    }
}

/// Builds an [`AnswerValue`] from a raw form value.
pub fn make_answer_value(raw: i64) -> Result<AnswerValue, OutOfRange> {
    match raw {
        1..=5 => Ok(AnswerValue(raw as u8)),
        _ => Err(OutOfRange(raw)),
    }
}

impl AnswerValue {
    pub fn raw(self) -> u8 {
        self.0
    }

    pub fn label(self) -> &'static str {
        LIKERT_LABELS[usize::from(self.0) - 1]
    }

    pub fn from_label(label: &str) -> Option<AnswerValue> {
        LIKERT_LABELS.iter().position(|l| *l == label).map(|i| AnswerValue(i as u8 + 1))
    }

    pub fn all() -> impl Iterator<Item = AnswerValue> {
        (1..=5).map(AnswerValue)
    }
}

impl fmt::Display for AnswerValue {
    /// Renders as `"5 - foarte mult"`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} - {}", self.0, self.label())
    }
}

/// Respondent identity: the source address in canonical textual form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClientIp(IpAddr);

impl ClientIp {
    pub fn parse(s: &str) -> Result<ClientIp, InvalidAddress> {
        s.trim().parse::<IpAddr>().map(ClientIp::from).map_err(|_| InvalidAddress(s.to_owned()))
    }

    pub fn addr(&self) -> IpAddr {
        self.0
    }
}

impl From<IpAddr> for ClientIp {
    fn from(addr: IpAddr) -> Self {
        // IPv4-mapped IPv6 peers collapse to their IPv4 form.
        ClientIp(addr.to_canonical())
    }
}

impl FromStr for ClientIp {
    type Err = InvalidAddress;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClientIp::parse(s)
    }
}

impl fmt::Display for ClientIp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Serialize for ClientIp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClientIp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ClientIp::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TeacherId(String);

impl TeacherId {
    pub fn new(id: impl Into<String>) -> Result<TeacherId, InvalidTeacher> {
        let id = id.into();
        if id.is_empty() || id.len() > 64 {
            return Err(InvalidTeacher(format!("id must be 1..=64 characters, got {}", id.len())));
        }
        if !id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')) {
            return Err(InvalidTeacher(format!("id {id:?} contains characters outside [A-Za-z0-9._-]")));
        }
        Ok(TeacherId(id))
    }

    pub fn generate() -> TeacherId {
        TeacherId(uuid::Uuid::new_v4().simple().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TeacherId {
    type Error = InvalidTeacher;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        TeacherId::new(s)
    }
}

impl From<TeacherId> for String {
    fn from(id: TeacherId) -> Self {
        id.0
    }
}

impl fmt::Display for TeacherId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Teacher {
    pub id: TeacherId,
    pub display_name: String,
}

impl Teacher {
    pub fn new(id: TeacherId, display_name: impl Into<String>) -> Result<Teacher, InvalidTeacher> {
        let display_name = display_name.into().trim().to_owned();
        if display_name.is_empty() {
            return Err(InvalidTeacher("display name is empty".into()));
        }
        Ok(Teacher { id, display_name })
    }
}

/// The three states of the student interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionMode {
    /// Active campaign, allowlisted address: answers count.
    Official,
    /// Active campaign, any other address: trial run with reset.
    Demo,
    /// Campaign inactive: nothing is accepted.
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SessionKey {
    pub client_ip: ClientIp,
    pub teacher_id: TeacherId,
}

impl SessionKey {
    pub fn new(client_ip: ClientIp, teacher_id: TeacherId) -> SessionKey {
        SessionKey { client_ip, teacher_id }
    }
}

/// Progress of one respondent through the questionnaire for one teacher.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationSession {
    pub client_ip: ClientIp,
    pub teacher_id: TeacherId,
    pub last_answered: u32,
    /// Questionnaire length when the session was opened.
    pub total: u32,
    pub mode: SessionMode,
    pub started_at: Timestamp,
    pub completed_at: Option<Timestamp>,
}

impl EvaluationSession {
    pub fn key(&self) -> SessionKey {
        SessionKey::new(self.client_ip, self.teacher_id.clone())
    }

    pub fn is_complete(&self) -> bool {
        self.completed_at.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub client_ip: ClientIp,
    pub teacher_id: TeacherId,
    pub question_index: u32,
    pub value: AnswerValue,
    pub answered_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("an active campaign needs a current teacher")]
    NoTeacherSelected,
    #[error("deadline must be a positive number of seconds")]
    InvalidDeadline,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub active: bool,
    pub current_teacher: Option<TeacherId>,
    pub allowlist: BTreeSet<ClientIp>,
    pub deadline_seconds: Option<u64>,
    #[serde(default)]
    pub admin_username: String,
    /// Supplied at startup; never written to the store or the wire.
    #[serde(skip)]
    pub admin_password_hash: Option<PasswordHash>,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.active && self.current_teacher.is_none() {
            return Err(ConfigError::NoTeacherSelected);
        }
        if self.deadline_seconds == Some(0) {
            return Err(ConfigError::InvalidDeadline);
        }
        Ok(())
    }

    pub fn is_allowlisted(&self, ip: &ClientIp) -> bool {
        self.allowlist.contains(ip)
    }
}
