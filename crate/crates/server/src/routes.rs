use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::header::CONTENT_TYPE;
use axum::response::IntoResponse;
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::Deserialize;
use teval_core::access::classify;
use teval_core::admin::{AdminCredential, AdminToken, ParameterUpdate, StatusReport, TeacherInput};
use teval_core::model::{now_utc, CampaignConfig, SessionMode, Teacher, TeacherId};
use teval_core::results::{self, PrintableReport, ResultRow};
use teval_core::session::{OpenOutcome, SubmitOutcome};
use teval_core::store::{IntegrityReport, TeacherEntry};
use teval_core::wire::{AnswerRequest, ErrorCode, ReloadResponse, ResetResponse, SessionResponse, SessionState};

use crate::error::ApiError;
use crate::extract::{AdminAuth, ClientAddr};
use crate::{print, AppState};

pub fn api() -> Router<AppState> {
    Router::new()
        .route("/api/session", get(open_session))
        .route("/api/session/answer", post(submit_answer))
        .route("/api/session/reset", post(reset_session))
        .route("/api/admin/login", post(login))
        .route("/api/admin/logout", post(logout))
        .route("/api/admin/status", get(status))
        .route("/api/admin/config", get(get_config).put(put_config))
        .route("/api/admin/teachers", get(list_teachers).post(upsert_teacher))
        .route("/api/admin/teachers/{id}", delete(remove_teacher))
        .route("/api/admin/questions/reload", post(reload_questions))
        .route("/api/admin/integrity", get(integrity))
        .route("/api/results", get(list_results))
        .route("/api/results/{questionnaire_no}", get(report))
        .route("/api/results/{questionnaire_no}/print", get(print_report))
}

/// Runs store-touching work off the async workers; journal writes may fsync.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(ApiError::storage)?
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::new(ErrorCode::InvalidRequest, e.body_text()))
}

async fn open_session(
    State(state): State<AppState>,
    ClientAddr(ip): ClientAddr,
) -> Result<Json<SessionResponse>, ApiError> {
    let config = state.engine.store().config();
    let decision = classify(&ip, &config);
    let engine = state.engine.clone();
    let outcome = blocking(move || engine.open_or_resume(&ip, &config, now_utc()).map_err(ApiError::from))
        .await
        .map_err(|e| e.with_mode(decision.mode))?;
    let mut resp = SessionResponse {
        state: SessionState::Question,
        mode: decision.mode,
        reset_allowed: decision.reset_allowed,
        question: None,
        completed: None,
        closed: None,
    };
    match outcome {
        OpenOutcome::Question(v) => resp.question = Some(v),
        OpenOutcome::Completed(n) => {
            resp.state = SessionState::Completed;
            resp.completed = Some(n);
        }
        OpenOutcome::Closed(n) => {
            resp.state = SessionState::Closed;
            resp.closed = Some(n);
        }
    }
    Ok(Json(resp))
}

async fn submit_answer(
    State(state): State<AppState>,
    ClientAddr(ip): ClientAddr,
    payload: Result<Json<AnswerRequest>, JsonRejection>,
) -> Result<Json<SessionResponse>, ApiError> {
    let config = state.engine.store().config();
    let decision = classify(&ip, &config);
    let with_mode = |e: ApiError| e.with_mode(decision.mode);
    let req = body(payload).map_err(with_mode)?;
    let teacher = match (&config.current_teacher, decision.mode) {
        (_, SessionMode::Closed) => {
            return Err(with_mode(ApiError::new(ErrorCode::CampaignClosed, "the campaign is not active")))
        }
        (Some(t), _) => t.clone(),
        (None, _) => return Err(with_mode(ApiError::new(ErrorCode::NoTeacherSelected, "no teacher selected"))),
    };
    let engine = state.engine.clone();
    let outcome = blocking(move || {
        engine.submit_answer(&ip, &teacher, req.question_index, req.value, &config, now_utc()).map_err(ApiError::from)
    })
    .await
    .map_err(with_mode)?;
    let mut resp = SessionResponse {
        state: SessionState::Question,
        mode: decision.mode,
        reset_allowed: decision.reset_allowed,
        question: None,
        completed: None,
        closed: None,
    };
    match outcome {
        SubmitOutcome::Accepted(next) => resp.question = Some(next),
        SubmitOutcome::Completed(n) => {
            resp.state = SessionState::Completed;
            resp.completed = Some(n);
        }
        SubmitOutcome::Rejected { reason, retry } => return Err(with_mode(ApiError::rejected(reason, retry))),
    }
    Ok(Json(resp))
}

async fn reset_session(
    State(state): State<AppState>,
    ClientAddr(ip): ClientAddr,
) -> Result<Json<ResetResponse>, ApiError> {
    let config = state.engine.store().config();
    let decision = classify(&ip, &config);
    let engine = state.engine.clone();
    let deleted = blocking(move || engine.reset_demo(&ip, &config).map_err(ApiError::from))
        .await
        .map_err(|e| e.with_mode(decision.mode))?;
    Ok(Json(ResetResponse { mode: decision.mode, reset_allowed: decision.reset_allowed, deleted_answers: deleted }))
}

async fn login(
    State(state): State<AppState>,
    payload: Result<Json<AdminCredential>, JsonRejection>,
) -> Result<Json<AdminToken>, ApiError> {
    let cred = body(payload)?;
    let admin = state.admin.clone();
    blocking(move || Ok(admin.authenticate(&cred, now_utc())?)).await.map(Json)
}

async fn logout(
    State(state): State<AppState>,
    AdminAuth(token): AdminAuth,
) -> Result<Json<serde_json::Value>, ApiError> {
    state.admin.authorize(&token, now_utc())?;
    state.admin.logout(&token);
    Ok(Json(serde_json::json!({})))
}

async fn status(State(state): State<AppState>, AdminAuth(token): AdminAuth) -> Result<Json<StatusReport>, ApiError> {
    let admin = state.admin.clone();
    blocking(move || Ok(admin.view_status(&token, now_utc())?)).await.map(Json)
}

async fn get_config(
    State(state): State<AppState>,
    AdminAuth(token): AdminAuth,
) -> Result<Json<CampaignConfig>, ApiError> {
    state.admin.authorize(&token, now_utc())?;
    Ok(Json((*state.engine.store().config()).clone()))
}

async fn put_config(
    State(state): State<AppState>,
    AdminAuth(token): AdminAuth,
    payload: Result<Json<ParameterUpdate>, JsonRejection>,
) -> Result<Json<CampaignConfig>, ApiError> {
    state.admin.authorize(&token, now_utc())?;
    let update = body(payload)?;
    let admin = state.admin.clone();
    blocking(move || Ok((*admin.set_parameters(&token, update, now_utc())?).clone())).await.map(Json)
}

#[derive(Deserialize)]
struct TeachersQuery {
    #[serde(default)]
    include_hidden: bool,
}

async fn list_teachers(
    State(state): State<AppState>,
    AdminAuth(token): AdminAuth,
    Query(q): Query<TeachersQuery>,
) -> Result<Json<Vec<TeacherEntry>>, ApiError> {
    Ok(Json(state.admin.list_teachers(&token, q.include_hidden, now_utc())?))
}

async fn upsert_teacher(
    State(state): State<AppState>,
    AdminAuth(token): AdminAuth,
    payload: Result<Json<TeacherInput>, JsonRejection>,
) -> Result<Json<Teacher>, ApiError> {
    state.admin.authorize(&token, now_utc())?;
    let input = body(payload)?;
    let admin = state.admin.clone();
    blocking(move || Ok(admin.upsert_teacher(&token, input, now_utc())?)).await.map(Json)
}

async fn remove_teacher(
    State(state): State<AppState>,
    AdminAuth(token): AdminAuth,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    state.admin.authorize(&token, now_utc())?;
    let id = TeacherId::new(id).map_err(|e| ApiError::new(ErrorCode::TeacherNotFound, e.to_string()))?;
    let admin = state.admin.clone();
    blocking(move || Ok(admin.remove_teacher(&token, &id, now_utc())?)).await?;
    Ok(Json(serde_json::json!({})))
}

async fn reload_questions(
    State(state): State<AppState>,
    AdminAuth(token): AdminAuth,
) -> Result<Json<ReloadResponse>, ApiError> {
    let admin = state.admin.clone();
    let items = blocking(move || Ok(admin.reload_bank(&token, now_utc())?)).await?;
    Ok(Json(ReloadResponse { items }))
}

async fn integrity(
    State(state): State<AppState>,
    AdminAuth(token): AdminAuth,
) -> Result<Json<IntegrityReport>, ApiError> {
    state.admin.authorize(&token, now_utc())?;
    Ok(Json(state.engine.store().integrity_scan()))
}

#[derive(Deserialize)]
struct ResultsQuery {
    #[serde(default)]
    teacher: Option<String>,
    #[serde(default)]
    include_demo: bool,
}

async fn list_results(
    State(state): State<AppState>,
    AdminAuth(token): AdminAuth,
    Query(q): Query<ResultsQuery>,
) -> Result<Json<Vec<ResultRow>>, ApiError> {
    state.admin.authorize(&token, now_utc())?;
    let teacher = match q.teacher.as_deref().filter(|t| !t.is_empty()) {
        Some(t) => Some(TeacherId::new(t).map_err(|e| ApiError::new(ErrorCode::InvalidRequest, e.to_string()))?),
        None => None,
    };
    let bank = state.engine.bank();
    Ok(Json(results::list_results(state.engine.store(), &bank, teacher.as_ref(), q.include_demo)))
}

async fn report(
    State(state): State<AppState>,
    AdminAuth(token): AdminAuth,
    Path(questionnaire_no): Path<u64>,
) -> Result<Json<PrintableReport>, ApiError> {
    state.admin.authorize(&token, now_utc())?;
    let bank = state.engine.bank();
    Ok(Json(results::printable_report(state.engine.store(), &bank, questionnaire_no)?))
}

async fn print_report(
    State(state): State<AppState>,
    AdminAuth(token): AdminAuth,
    Path(questionnaire_no): Path<u64>,
) -> Result<impl IntoResponse, ApiError> {
    state.admin.authorize(&token, now_utc())?;
    let bank = state.engine.bank();
    let report = results::printable_report(state.engine.store(), &bank, questionnaire_no)?;
    Ok(([(CONTENT_TYPE, "text/html; charset=utf-8")], print::render(&report)))
}

pub async fn not_found() -> ApiError {
    ApiError::not_found()
}
