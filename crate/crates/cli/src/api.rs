//! JSON session API.
//!
//! | method | path                              | body               | response            |
//! |--------|-----------------------------------|--------------------|---------------------|
//! | POST   | `/sessions`                       | [`CreateSession`]  | [`SessionInfo`]     |
//! | POST   | `/sessions/{id}/phrases`          | [`SubmitPhrase`]   | [`PhraseResponse`]  |
//! | GET    | `/sessions/{id}/regions/{context}`| none               | [`RegionResponse`]  |
//! | GET    | `/sessions/{id}/trace`            | none               | [`TraceResponse`]   |
//! | GET    | `/sessions/{id}/config`           | none               | [`ConfigResponse`]  |
//! | PUT    | `/sessions/{id}/config`           | comprehension cfg  | [`ConfigResponse`]  |
//!
//! Unknown sessions and contexts answer 404. Malformed bodies answer 400
//! with the path of the offending field. Every response carries the
//! session version, which grows with each change to the session.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use meaning_core::comprehension::EffectorOutcome;
use meaning_core::interpreter::{CandidateSummary, HistoryEntry};
use meaning_core::render::HeatmapStats;
use meaning_core::scenario::summarize;
use meaning_core::{AxisId, ComprehensionConfig, ContextId, EngineConfig, Heatmap, Session};

use crate::Engine;

pub struct SessionRecord {
    pub id: u64,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub session: Session,
}

pub struct AppState {
    engine: Engine,
    next_id: AtomicU64,
    sessions: RwLock<HashMap<u64, Arc<Mutex<SessionRecord>>>>,
}

impl AppState {
    pub fn new(engine: Engine) -> Arc<Self> {
        Arc::new(AppState { engine, next_id: AtomicU64::new(1), sessions: RwLock::new(HashMap::new()) })
    }

    fn get(&self, id: u64) -> Result<Arc<Mutex<SessionRecord>>, ApiError> {
        let map = self.sessions.read().expect("session map lock");
        map.get(&id).cloned().ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/phrases", post(submit_phrase))
        .route("/sessions/{id}/regions/{context}", get(region))
        .route("/sessions/{id}/trace", get(trace))
        .route("/sessions/{id}/config", get(get_config).put(put_config))
        .with_state(state)
}

pub async fn serve(engine: Engine, bind: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(engine))).await?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    /// Path of the field that failed to deserialize.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip)]
    status: u16,
}

impl ApiError {
    fn not_found(error: String) -> Self {
        ApiError { error, path: None, status: 404 }
    }

    fn bad_request(error: String, path: Option<String>) -> Self {
        ApiError { error, path, status: 400 }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

/// Deserialize a body, naming the offending field on failure. An empty
/// body stands for `{}`.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    let text: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { bytes };
    let de = &mut serde_json::Deserializer::from_slice(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad_request(e.into_inner().to_string(), Some(path))
    })
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    /// Overrides of the engine configuration; omitted fields keep defaults.
    #[serde(default)]
    pub config: Option<EngineConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: u64,
    pub created_at: u64,
    pub version: u64,
    pub config: EngineConfig,
}

async fn create_session(State(app): State<Arc<AppState>>, bytes: Bytes) -> Result<Json<SessionInfo>, ApiError> {
    let req: CreateSession = body(&bytes)?;
    let mut session = app.engine.session();
    if let Some(config) = req.config {
        session.set_config(config).map_err(|e| ApiError::bad_request(e.to_string(), Some("config".into())))?;
    }
    let id = app.next_id.fetch_add(1, Ordering::Relaxed);
    let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let info = SessionInfo { id, created_at, version: session.version(), config: session.config().clone() };
    let record = SessionRecord { id, created_at, session };
    app.sessions.write().expect("session map lock").insert(id, Arc::new(Mutex::new(record)));
    Ok(Json(info))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitPhrase {
    pub phrase: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Effector {
    pub axis: AxisId,
    pub value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PhraseResponse {
    pub version: u64,
    pub phrase: String,
    /// `accepted`, `retried_spare_context` or `clarification_requested`.
    pub action: String,
    pub summary: String,
    pub structure: Option<String>,
    pub context: Option<ContextId>,
    pub flags: Vec<String>,
    /// Aggregate and per-check scores of the chosen interpretation.
    pub score: Option<f64>,
    pub scores: BTreeMap<String, f64>,
    pub effector: Option<Effector>,
    pub effector_outcome: Option<EffectorOutcome>,
    pub parameters: Vec<(AxisId, f64)>,
    pub candidates: Vec<CandidateSummary>,
    pub clarification: Option<String>,
    pub active: Option<ContextId>,
}

async fn submit_phrase(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    bytes: Bytes,
) -> Result<Json<PhraseResponse>, ApiError> {
    let record = app.get(id)?;
    let req: SubmitPhrase = body(&bytes)?;
    let mut record = record.lock().await;
    let session = &mut record.session;
    let o = session.interpret(&req.phrase);
    let chosen = o.chosen.as_ref();
    Ok(Json(PhraseResponse {
        version: session.version(),
        phrase: o.phrase.clone(),
        action: o.action.name().into(),
        summary: summarize(&o),
        structure: chosen.map(|c| c.candidate.structure()),
        context: chosen.map(|c| c.region.context().id.clone()),
        flags: o.flag_names().into_iter().map(str::to_string).collect(),
        score: chosen.map(|c| c.report.aggregate),
        scores: chosen
            .map(|c| c.report.scores.iter().map(|(k, v)| (k.name().to_string(), *v)).collect())
            .unwrap_or_default(),
        effector: o.effector().map(|(axis, value)| Effector { axis, value }),
        effector_outcome: chosen.map(|c| c.report.effector.clone()),
        parameters: chosen.map(|c| c.clauses.iter().flat_map(|k| k.parameters.clone()).collect()).unwrap_or_default(),
        candidates: o.candidates.clone(),
        clarification: o.clarification.clone(),
        active: session.active().cloned(),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegionResponse {
    pub version: u64,
    /// Whether the session holds knowledge about the context yet.
    pub known: bool,
    pub heatmap: Heatmap,
    pub stats: HeatmapStats,
}

async fn region(
    State(app): State<Arc<AppState>>,
    Path((id, name)): Path<(u64, String)>,
) -> Result<Json<RegionResponse>, ApiError> {
    let record = app.get(id)?;
    let record = record.lock().await;
    let session = &record.session;
    let (region, known) = crate::view(&app.engine, session, &name).map_err(|e| ApiError::not_found(e.to_string()))?;
    let heatmap = Heatmap::of(&region, session.config().grid_resolution)
        .map_err(|e| ApiError::bad_request(e.to_string(), None))?;
    Ok(Json(RegionResponse { version: session.version(), known, stats: heatmap.stats(), heatmap }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceResponse {
    pub version: u64,
    pub active: Option<ContextId>,
    pub history: Vec<HistoryEntry>,
}

async fn trace(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Json<TraceResponse>, ApiError> {
    let record = app.get(id)?;
    let record = record.lock().await;
    let s = &record.session;
    Ok(Json(TraceResponse { version: s.version(), active: s.active().cloned(), history: s.history().to_vec() }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConfigResponse {
    pub version: u64,
    pub comprehension: ComprehensionConfig,
}

async fn get_config(State(app): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Json<ConfigResponse>, ApiError> {
    let record = app.get(id)?;
    let record = record.lock().await;
    let s = &record.session;
    Ok(Json(ConfigResponse { version: s.version(), comprehension: s.config().comprehension.clone() }))
}

async fn put_config(
    State(app): State<Arc<AppState>>,
    Path(id): Path<u64>,
    bytes: Bytes,
) -> Result<Json<ConfigResponse>, ApiError> {
    let record = app.get(id)?;
    let comprehension: ComprehensionConfig = body(&bytes)?;
    let mut record = record.lock().await;
    let s = &mut record.session;
    let config = EngineConfig { comprehension, ..s.config().clone() };
    s.set_config(config).map_err(|e| ApiError::bad_request(e.to_string(), None))?;
    Ok(Json(ConfigResponse { version: s.version(), comprehension: s.config().comprehension.clone() }))
}
