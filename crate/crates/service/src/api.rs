//! HTTP API over tagging sessions.
//!
//! Reads may run concurrently; assignments take the session's write lock, so
//! they are applied one at a time and every read sees the latest committed
//! vocabulary version.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use mwo_core::corpus::{Fleet, WorkOrder};
use mwo_core::kpi::{KpiConfig, KpiError, KpiReport};
use mwo_core::pipeline::{rule_kpi, PipelineError, RuleOptions};
use mwo_core::rules::{rule_report, select, select_all, RuleError, RuleId, RuleReport};
use mwo_core::tagging::{TagEntity, TaggingError, TaggingSession, DEFAULT_SIMILARITY_THRESHOLD};
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;
use tower_http::cors::CorsLayer;

pub const DEFAULT_QUEUE_SIZE: usize = 20;

/// Route templates served by [`router`], as listed in the endpoint document.
pub const ROUTES: &[(&str, &str)] = &[
    ("get", "/sessions"),
    ("get", "/session/{id}/terms"),
    ("get", "/session/{id}/similar/{term}"),
    ("post", "/session/{id}/assign"),
    ("get", "/session/{id}/progress"),
    ("post", "/session/{id}/apply"),
    ("get", "/session/{id}/kpi"),
    ("get", "/session/{id}/export/vocab"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NotFound,
    Conflict,
    Validation,
    Internal,
}

/// Body of every non-success response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl ApiError {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            detail: None,
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Validation, message)
    }

    fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.code {
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Conflict => StatusCode::CONFLICT,
            ErrorCode::Validation => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self)).into_response()
    }
}

impl From<TaggingError> for ApiError {
    fn from(e: TaggingError) -> Self {
        let code = match e {
            TaggingError::InvalidEntity(_)
            | TaggingError::UnknownTerm(_)
            | TaggingError::EmptyAlias(_)
            | TaggingError::NoTerms
            | TaggingError::InvalidThreshold(_)
            | TaggingError::InvalidHours(_) => ErrorCode::Validation,
            _ => ErrorCode::Internal,
        };
        ApiError::new(code, e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Live KPI value for one rule at one vocabulary version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiPreview {
    pub session_id: String,
    pub version: u64,
    pub rule: RuleId,
    /// False when the rule cannot be evaluated yet; `reason` says why.
    pub available: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub selected_count: usize,
    pub excluded_by_negation: usize,
    pub fleet_failure_rate: Option<f64>,
    pub report: Option<KpiReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplySummary {
    pub version: u64,
    pub corpus_fingerprint: String,
    pub n_docs: usize,
    pub tagged_docs: usize,
    pub aliases: Vec<AliasRef>,
    /// Absent while the failure alias is not tagged yet.
    pub rule_report: Option<RuleReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasRef {
    pub alias: String,
    pub entity: TagEntity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignRequest {
    pub terms: Vec<String>,
    #[serde(default)]
    pub alias: String,
    pub entity: String,
    /// Rejects the request with a conflict when the session has moved on.
    #[serde(default)]
    pub expected_version: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    pub n_docs: usize,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarTerms {
    pub term: String,
    pub threshold: f64,
    pub suggestions: Vec<mwo_core::tagging::Suggestion>,
}

/// One tagging session plus the inputs needed for its KPI preview.
pub struct SessionHandle {
    pub id: String,
    pub created_at: DateTime<Utc>,
    orders: Vec<WorkOrder>,
    fleet: Fleet,
    rules: RuleOptions,
    kpi: KpiConfig,
    session: RwLock<TaggingSession>,
    cache: Mutex<HashMap<(u64, RuleId), KpiPreview>>,
}

impl SessionHandle {
    pub fn new(
        id: impl Into<String>,
        orders: Vec<WorkOrder>,
        fleet: Fleet,
        session: TaggingSession,
        rules: RuleOptions,
        kpi: KpiConfig,
    ) -> Self {
        Self {
            id: id.into(),
            created_at: Utc::now(),
            orders,
            fleet,
            rules,
            kpi,
            session: RwLock::new(session),
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Records the end of the analyst's working period.
    pub async fn close(&self) -> Result<(), TaggingError> {
        self.session.write().await.close(Utc::now())
    }

    fn preview(&self, session: &TaggingSession, rule: RuleId) -> Result<KpiPreview, ApiError> {
        let version = session.version();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&(version, rule)) {
            return Ok(hit.clone());
        }
        let mut preview = KpiPreview {
            session_id: self.id.clone(),
            version,
            rule,
            available: false,
            reason: None,
            selected_count: 0,
            excluded_by_negation: 0,
            fleet_failure_rate: None,
            report: None,
        };
        let tagged = session.apply();
        match select(rule, &tagged, &self.rules.failure_alias, &self.rules.negation) {
            Ok(selection) => {
                preview.selected_count = selection.selected_ids.len();
                preview.excluded_by_negation = selection.excluded_by_negation.len();
            }
            Err(RuleError::UnknownFailureAlias(alias)) => {
                preview.reason = Some(format!("no problem (P) term is tagged with the failure alias `{alias}` yet"));
            }
            Err(e) => return Err(ApiError::new(ErrorCode::Internal, e.to_string())),
        }
        if preview.reason.is_none() {
            let effort = session.effort().total_hours();
            match rule_kpi(
                &self.orders,
                session.docs(),
                session.vocabulary(),
                rule,
                &self.rules,
                &self.fleet,
                &self.kpi,
                effort,
            ) {
                Ok((_, report)) => {
                    preview.available = true;
                    preview.fleet_failure_rate = Some(report.fleet_failure_rate);
                    preview.report = Some(report);
                }
                Err(PipelineError::Kpi(KpiError::NoDefinedRate)) => {
                    preview.reason = Some("no turbine has a selected failure yet".into());
                }
                Err(e) => return Err(ApiError::new(ErrorCode::Internal, e.to_string())),
            }
        }
        self.cache
            .lock()
            .expect("cache lock")
            .insert((version, rule), preview.clone());
        Ok(preview)
    }
}

#[derive(Default)]
pub struct AppState {
    sessions: BTreeMap<String, Arc<SessionHandle>>,
}

impl AppState {
    pub fn new(sessions: impl IntoIterator<Item = SessionHandle>) -> Self {
        Self {
            sessions: sessions.into_iter().map(|s| (s.id.clone(), Arc::new(s))).collect(),
        }
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Arc<SessionHandle>> {
        self.sessions.values()
    }

    fn get(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("unknown session `{id}`")))
    }
}

type Shared = Arc<AppState>;
type Params = Query<HashMap<String, String>>;

fn param<T: std::str::FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError>
where
    T::Err: std::fmt::Display,
{
    params
        .get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| ApiError::validation(format!("query parameter `{key}`: {e}")))
        })
        .transpose()
}

async fn list_sessions(State(state): State<Shared>) -> Json<Vec<SessionInfo>> {
    let mut out = Vec::new();
    for s in state.sessions() {
        let session = s.session.read().await;
        out.push(SessionInfo {
            session_id: s.id.clone(),
            created_at: s.created_at,
            n_docs: session.docs().len(),
            version: session.version(),
        });
    }
    Json(out)
}

async fn terms(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(params): Params,
) -> ApiResult<mwo_core::tagging::NextTerms> {
    let handle = state.get(&id)?;
    let n = param::<usize>(&params, "n")?.unwrap_or(DEFAULT_QUEUE_SIZE);
    let session = handle.session.read().await;
    Ok(Json(session.next_terms(n)))
}

async fn similar(
    State(state): State<Shared>,
    Path((id, term)): Path<(String, String)>,
    Query(params): Params,
) -> ApiResult<SimilarTerms> {
    let handle = state.get(&id)?;
    let threshold = param::<f64>(&params, "threshold")?.unwrap_or(DEFAULT_SIMILARITY_THRESHOLD);
    let session = handle.session.read().await;
    let suggestions = session.suggest_similar(&term, threshold)?;
    Ok(Json(SimilarTerms {
        term,
        threshold,
        suggestions,
    }))
}

async fn assign(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<mwo_core::tagging::AssignOutcome> {
    let handle = state.get(&id)?;
    let request: AssignRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::validation(format!("request body: {e}")))?;
    let entity: TagEntity = request.entity.parse()?;
    let mut session = handle.session.write().await;
    if let Some(expected) = request.expected_version {
        if expected != session.version() {
            return Err(ApiError::new(
                ErrorCode::Conflict,
                format!("session is at version {}, request expected {expected}", session.version()),
            )
            .with_detail(serde_json::json!({ "current_version": session.version() })));
        }
    }
    Ok(Json(session.assign(&request.terms, &request.alias, entity, Utc::now())?))
}

async fn progress(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<mwo_core::tagging::Progress> {
    let handle = state.get(&id)?;
    let session = handle.session.read().await;
    Ok(Json(session.progress()))
}

async fn apply(State(state): State<Shared>, Path(id): Path<String>) -> ApiResult<ApplySummary> {
    let handle = state.get(&id)?;
    let session = handle.session.read().await;
    let tagged = session.apply();
    let rule_report = match select_all(&tagged, &handle.rules.failure_alias, &handle.rules.negation) {
        Ok(selections) => Some(
            rule_report(&selections, tagged.docs.len()).map_err(|e| ApiError::new(ErrorCode::Internal, e.to_string()))?,
        ),
        Err(RuleError::UnknownFailureAlias(_)) => None,
        Err(e) => return Err(ApiError::new(ErrorCode::Internal, e.to_string())),
    };
    Ok(Json(ApplySummary {
        version: session.version(),
        corpus_fingerprint: tagged.corpus_fingerprint.clone(),
        n_docs: tagged.docs.len(),
        tagged_docs: tagged.docs.iter().filter(|d| !d.tags.is_empty()).count(),
        aliases: tagged
            .aliases
            .iter()
            .map(|(alias, entity)| AliasRef {
                alias: alias.clone(),
                entity: *entity,
            })
            .collect(),
        rule_report,
    }))
}

async fn kpi(State(state): State<Shared>, Path(id): Path<String>, Query(params): Params) -> ApiResult<KpiPreview> {
    let handle = state.get(&id)?;
    let rule = param::<RuleId>(&params, "rule")?.ok_or_else(|| ApiError::validation("query parameter `rule` is required"))?;
    let session = handle.session.read().await;
    Ok(Json(handle.preview(&session, rule)?))
}

async fn export_vocab(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let handle = state.get(&id)?;
    let session = handle.session.read().await;
    let csv = session.vocabulary().to_csv_string();
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

async fn fallback() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", get(list_sessions))
        .route("/session/{id}/terms", get(terms))
        .route("/session/{id}/similar/{term}", get(similar))
        .route("/session/{id}/assign", post(assign))
        .route("/session/{id}/progress", get(progress))
        .route("/session/{id}/apply", post(apply))
        .route("/session/{id}/kpi", get(kpi))
        .route("/session/{id}/export/vocab", get(export_vocab))
        .fallback(fallback)
        .layer(CorsLayer::permissive())
        .with_state(state)
}
