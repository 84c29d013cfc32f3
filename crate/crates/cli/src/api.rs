//! JSON-over-HTTP access to interactive sessions.
//!
//! Every payload carries `"v": 1`. Sessions live in memory; requests to one
//! session are serialized, requests to different sessions run in parallel.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use eicharvest::corpus::{make_snippets, DEFAULT_SNIPPET_WINDOW};
use eicharvest::{CorpusIndex, EicSnippet, EntityRepresentation, Error, Judgment, Session, SessionOptions, StrategyName};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub const API_VERSION: u32 = 1;
pub const DEFAULT_STRATEGY: &str = "I(Lm,Div_Ent-Feedback)";

/// What a request to a session that is already handling one gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum BusyPolicy {
    /// Queue behind the running request.
    #[default]
    Wait,
    /// Answer 409 immediately.
    Reject,
}

#[derive(Debug, Clone)]
pub struct ApiConfig {
    /// Name clients may pass as `corpus`; anything else is rejected.
    pub corpus_name: String,
    pub busy: BusyPolicy,
    /// Where finished sessions are written as `<session_id>.json`.
    pub snapshot_dir: Option<PathBuf>,
    pub snippet_window: usize,
    pub options: SessionOptions,
    /// Allowed browser origins; empty allows any.
    pub cors_origins: Vec<String>,
}

impl ApiConfig {
    pub fn new(corpus_name: impl Into<String>) -> Self {
        ApiConfig {
            corpus_name: corpus_name.into(),
            busy: BusyPolicy::Wait,
            snapshot_dir: None,
            snippet_window: DEFAULT_SNIPPET_WINDOW,
            options: SessionOptions::default(),
            cors_origins: Vec::new(),
        }
    }
}

pub struct SessionHandle {
    pub session_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub strategy: StrategyName,
    pub session: Session,
    pub finished: bool,
}

pub struct AppState {
    index: Arc<CorpusIndex>,
    config: ApiConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionHandle>>>>,
}

impl AppState {
    pub fn new(index: Arc<CorpusIndex>, config: ApiConfig) -> Arc<Self> {
        Arc::new(AppState {
            index,
            config,
            sessions: RwLock::new(HashMap::new()),
        })
    }

    pub fn index(&self) -> &Arc<CorpusIndex> {
        &self.index
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    /// The live handle of a session, for in-process inspection.
    pub fn handle(&self, id: &str) -> Option<Arc<Mutex<SessionHandle>>> {
        self.sessions.read().expect("session map poisoned").get(id).cloned()
    }

    async fn with_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut SessionHandle) -> Result<T, ApiError>,
    ) -> Result<T, ApiError> {
        let handle = self
            .handle(id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))?;
        let mut guard = match self.config.busy {
            BusyPolicy::Wait => handle.lock().await,
            BusyPolicy::Reject => handle
                .try_lock()
                .map_err(|_| ApiError::new(StatusCode::CONFLICT, format!("session {id} is busy")))?,
        };
        f(&mut guard)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::State(_) | Error::Conflict(_) => StatusCode::CONFLICT,
            Error::Validation(_) | Error::Config(_) | Error::Parse { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.body_text())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    v: u32,
    error: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            v: API_VERSION,
            error: &self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateRequest {
    pub names: Vec<String>,
    #[serde(default)]
    pub seed_keyphrases: Vec<String>,
    #[serde(default)]
    pub strategy: Option<String>,
    #[serde(default)]
    pub corpus: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DocumentPayload {
    pub v: u32,
    pub doc_id: String,
    pub snippets: Vec<EicSnippet>,
    /// `K_d`: the keyphrases the user may tick.
    pub keyphrases: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CreateResponse {
    pub v: u32,
    pub session_id: String,
    pub strategy: String,
    /// `None` when nothing matches the names and seeds.
    pub document: Option<DocumentPayload>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgmentRequest {
    pub doc_id: String,
    pub relevant: bool,
    #[serde(default)]
    pub accepted_keyphrases: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StateResponse {
    pub v: u32,
    pub session_id: String,
    pub strategy: String,
    pub names: Vec<String>,
    pub seed_keyphrases: Vec<String>,
    /// `K` with current weights.
    pub accepted: BTreeMap<String, f64>,
    /// `K⁻`.
    pub rejected: Vec<String>,
    pub rejected_count: usize,
    pub judged: usize,
    /// One flag per judgment, in order.
    pub consequential: Vec<bool>,
    pub current: Option<String>,
    pub exhausted: bool,
    pub finished: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RepresentationResponse {
    pub v: u32,
    pub session_id: String,
    pub names: Vec<String>,
    pub keyphrases: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    v: u32,
    session_id: &'a str,
    created_at: u64,
    strategy: String,
    seed_keyphrases: &'a [String],
    judgments: &'a [Judgment],
    representation: &'a EntityRepresentation,
}

fn document_payload(state: &AppState, session: &Session, doc_id: &str) -> Result<DocumentPayload, ApiError> {
    let doc = state.index.require(doc_id)?;
    Ok(DocumentPayload {
        v: API_VERSION,
        doc_id: doc_id.to_string(),
        snippets: make_snippets(&state.index, doc_id, &session.state().names, state.config.snippet_window)?,
        keyphrases: doc.keyphrases.keys().cloned().collect(),
    })
}

fn next_payload(state: &AppState, session: &mut Session) -> Result<Option<DocumentPayload>, ApiError> {
    match session.next_document()? {
        Some(d) => document_payload(state, session, &d).map(Some),
        None => Ok(None),
    }
}

fn document_response(doc: Option<DocumentPayload>) -> Response {
    match doc {
        Some(d) => (StatusCode::OK, Json(d)).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    if let Some(c) = &req.corpus {
        if *c != state.config.corpus_name {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("unknown corpus {c}; this server holds {}", state.config.corpus_name),
            ));
        }
    }
    let strategy: StrategyName = req.strategy.as_deref().unwrap_or(DEFAULT_STRATEGY).parse()?;
    let mut session = Session::start(
        Arc::clone(&state.index),
        &req.names,
        &req.seed_keyphrases,
        strategy,
        state.config.options,
        None,
    )?;
    let document = next_payload(&state, &mut session)?;
    let session_id = uuid::Uuid::new_v4().simple().to_string();
    let created_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let handle = SessionHandle {
        session_id: session_id.clone(),
        created_at,
        strategy,
        session,
        finished: false,
    };
    state
        .sessions
        .write()
        .expect("session map poisoned")
        .insert(session_id.clone(), Arc::new(Mutex::new(handle)));
    let body = CreateResponse {
        v: API_VERSION,
        session_id,
        strategy: strategy.to_string(),
        document,
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn current_document(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let doc = state
        .with_session(&id, |h| {
            if h.finished {
                return Ok(None);
            }
            next_payload(&state, &mut h.session)
        })
        .await?;
    Ok(document_response(doc))
}

async fn judge(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<JudgmentRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body?;
    let doc = state
        .with_session(&id, |h| {
            if h.finished {
                return Err(ApiError::new(StatusCode::CONFLICT, format!("session {id} is finished")));
            }
            h.session
                .apply_judgment(&req.doc_id, req.relevant, &req.accepted_keyphrases)?;
            next_payload(&state, &mut h.session)
        })
        .await?;
    Ok(document_response(doc))
}

async fn finish(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let rep = state
        .with_session(&id, |h| {
            let rep = h.session.finish();
            if let Some(dir) = &state.config.snapshot_dir {
                let snap = Snapshot {
                    v: API_VERSION,
                    session_id: &h.session_id,
                    created_at: h.created_at,
                    strategy: h.strategy.to_string(),
                    seed_keyphrases: &h.session.state().seed_keyphrases,
                    judgments: &h.session.state().judgments,
                    representation: &rep,
                };
                let path = dir.join(format!("{}.json", h.session_id));
                let json = serde_json::to_string_pretty(&snap)
                    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
                fs::create_dir_all(dir)
                    .and_then(|_| fs::write(&path, json + "\n"))
                    .map_err(|e| {
                        ApiError::new(
                            StatusCode::INTERNAL_SERVER_ERROR,
                            format!("writing {}: {e}", path.display()),
                        )
                    })?;
            }
            h.finished = true;
            Ok(RepresentationResponse {
                v: API_VERSION,
                session_id: h.session_id.clone(),
                names: rep.names,
                keyphrases: rep.keyphrases,
            })
        })
        .await?;
    Ok(Json(rep).into_response())
}

async fn session_state(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let body = state
        .with_session(&id, |h| {
            let st = h.session.state();
            Ok(StateResponse {
                v: API_VERSION,
                session_id: h.session_id.clone(),
                strategy: h.strategy.to_string(),
                names: st.names.clone(),
                seed_keyphrases: st.seed_keyphrases.clone(),
                accepted: st.accepted.clone(),
                rejected: st.rejected.iter().cloned().collect(),
                rejected_count: st.rejected.len(),
                judged: st.judgments.len(),
                consequential: st.judgments.iter().map(|j| j.consequential).collect(),
                current: st.current.clone(),
                exhausted: st.exhausted,
                finished: h.finished,
            })
        })
        .await?;
    Ok(Json(body).into_response())
}

#[derive(Serialize)]
struct Health<'a> {
    v: u32,
    corpus: &'a str,
    documents: usize,
    sessions: usize,
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    Json(Health {
        v: API_VERSION,
        corpus: &state.config.corpus_name,
        documents: state.index.len(),
        sessions: state.session_count(),
    })
    .into_response()
}

fn cors(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    if origins.is_empty() {
        layer.allow_origin(Any)
    } else {
        let values: Vec<HeaderValue> = origins.iter().filter_map(|o| o.parse().ok()).collect();
        layer.allow_origin(AllowOrigin::list(values))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let layer = cors(&state.config.cors_origins);
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/current", get(current_document))
        .route("/sessions/{id}/judgment", post(judge))
        .route("/sessions/{id}/finish", post(finish))
        .route("/sessions/{id}/state", get(session_state))
        .layer(layer)
        .with_state(state)
}

/// Serves until the future `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
