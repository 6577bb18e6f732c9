//! Async HTTP client for the teaching-evaluation service.

use reqwest::{Method, RequestBuilder, StatusCode};
use serde::de::DeserializeOwned;
use serde::Serialize;
use teval_core::admin::{AdminCredential, AdminToken, ParameterUpdate, StatusReport, TeacherInput};
use teval_core::model::{CampaignConfig, Teacher};
use teval_core::results::{PrintableReport, ResultRow};
use teval_core::store::{IntegrityReport, TeacherEntry};
use teval_core::wire::{AnswerRequest, ErrorBody, ReloadResponse, ResetResponse, SessionResponse};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{status}: {} ({})", body.message, body.code)]
    Api { status: StatusCode, body: ErrorBody },
    #[error("http: {0}")]
    Http(#[from] reqwest::Error),
}

impl ClientError {
    /// The service error body, if the server answered with one.
    pub fn api_body(&self) -> Option<&ErrorBody> {
        match self {
            ClientError::Api { body, .. } => Some(body),
            ClientError::Http(_) => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
    token: Option<String>,
    forwarded_for: Option<String>,
}

impl Client {
    pub fn new(base_url: impl Into<String>) -> Client {
        Client {
            http: reqwest::Client::new(),
            base: base_url.into().trim_end_matches('/').to_owned(),
            token: None,
            forwarded_for: None,
        }
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Client {
        self.token = Some(token.into());
        self
    }

    /// Sends `X-Forwarded-For`; only honoured by servers that trust it.
    pub fn with_forwarded_for(mut self, ip: impl Into<String>) -> Client {
        self.forwarded_for = Some(ip.into());
        self
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        if let Some(ip) = &self.forwarded_for {
            req = req.header("x-forwarded-for", ip);
        }
        req
    }

    async fn send(req: RequestBuilder) -> Result<reqwest::Response> {
        let resp = req.send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await?;
        let body = serde_json::from_str(&text).unwrap_or_else(|_| ErrorBody {
            code: teval_core::wire::ErrorCode::StorageFailure,
            message: if text.is_empty() { status.to_string() } else { text },
            mode: None,
            retry: None,
        });
        Err(ClientError::Api { status, body })
    }

    async fn json<T: DeserializeOwned>(req: RequestBuilder) -> Result<T> {
        Ok(Self::send(req).await?.json().await?)
    }

    async fn call<B: Serialize, T: DeserializeOwned>(&self, method: Method, path: &str, body: Option<&B>) -> Result<T> {
        let mut req = self.request(method, path);
        if let Some(b) = body {
            req = req.json(b);
        }
        Self::json(req).await
    }

    pub async fn session(&self) -> Result<SessionResponse> {
        self.call::<(), _>(Method::GET, "/api/session", None).await
    }

    pub async fn answer(&self, question_index: u32, value: Option<i64>) -> Result<SessionResponse> {
        let body = AnswerRequest { question_index, value };
        self.call(Method::POST, "/api/session/answer", Some(&body)).await
    }

    pub async fn reset(&self) -> Result<ResetResponse> {
        self.call::<(), _>(Method::POST, "/api/session/reset", None).await
    }

    /// Logs in and keeps the token for later calls.
    pub async fn login(&mut self, username: &str, password: &str) -> Result<AdminToken> {
        let cred = AdminCredential { username: username.into(), password: password.into() };
        let token: AdminToken = self.call(Method::POST, "/api/admin/login", Some(&cred)).await?;
        self.token = Some(token.token.clone());
        Ok(token)
    }

    pub async fn logout(&mut self) -> Result<()> {
        let _: serde_json::Value = self.call::<(), _>(Method::POST, "/api/admin/logout", None).await?;
        self.token = None;
        Ok(())
    }

    pub async fn status(&self) -> Result<StatusReport> {
        self.call::<(), _>(Method::GET, "/api/admin/status", None).await
    }

    pub async fn config(&self) -> Result<CampaignConfig> {
        self.call::<(), _>(Method::GET, "/api/admin/config", None).await
    }

    pub async fn set_config(&self, update: &ParameterUpdate) -> Result<CampaignConfig> {
        self.call(Method::PUT, "/api/admin/config", Some(update)).await
    }

    pub async fn teachers(&self, include_hidden: bool) -> Result<Vec<TeacherEntry>> {
        let path = format!("/api/admin/teachers?include_hidden={include_hidden}");
        self.call::<(), _>(Method::GET, &path, None).await
    }

    pub async fn upsert_teacher(&self, id: Option<&str>, display_name: &str) -> Result<Teacher> {
        let input = TeacherInput { id: id.map(str::to_owned), display_name: display_name.into() };
        self.call(Method::POST, "/api/admin/teachers", Some(&input)).await
    }

    pub async fn remove_teacher(&self, id: &str) -> Result<()> {
        let _: serde_json::Value =
            self.call::<(), _>(Method::DELETE, &format!("/api/admin/teachers/{id}"), None).await?;
        Ok(())
    }

    pub async fn reload_bank(&self) -> Result<ReloadResponse> {
        self.call::<(), _>(Method::POST, "/api/admin/questions/reload", None).await
    }

    pub async fn integrity(&self) -> Result<IntegrityReport> {
        self.call::<(), _>(Method::GET, "/api/admin/integrity", None).await
    }

    pub async fn results(&self, teacher: Option<&str>, include_demo: bool) -> Result<Vec<ResultRow>> {
        // Teacher ids are restricted to URL-safe characters.
        let mut path = format!("/api/results?include_demo={include_demo}");
        if let Some(t) = teacher {
            path.push_str("&teacher=");
            path.push_str(t);
        }
        self.call::<(), _>(Method::GET, &path, None).await
    }

    pub async fn report(&self, questionnaire_no: u64) -> Result<PrintableReport> {
        self.call::<(), _>(Method::GET, &format!("/api/results/{questionnaire_no}"), None).await
    }

    /// The printable HTML page.
    pub async fn print(&self, questionnaire_no: u64) -> Result<String> {
        let req = self.request(Method::GET, &format!("/api/results/{questionnaire_no}/print"));
        Ok(Self::send(req).await?.text().await?)
    }
}
