//! JSON-over-HTTP session service under `/v1`.
//!
//! A session holds the p-values server side and only ever returns the
//! values above the current cutoff. Each session sits behind its own lock,
//! so requests on one session are serialized while distinct sessions run
//! independently. Idle sessions are dropped lazily on the next request.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use uuid::Uuid;

use condmt::adaptive::{SessionStatus, StoppingRule, Suggestion};
use condmt::global_tests::{CombinedResult, GlobalMethod, TestOptions};
use condmt::qualint::{split_pvalues, StudyRecord};
use condmt::{AdaptiveConfig, PValueVector, TauSession};

/// Failure returned to the client as `{error, field}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    error: String,
    field: Option<String>,
}

impl ApiError {
    fn bad(field: &str, error: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            error: error.into(),
            field: Some(field.into()),
        }
    }

    fn not_found(id: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            error: format!("no session '{id}'"),
            field: None,
        }
    }

    fn conflict(e: condmt::Error) -> Self {
        ApiError {
            status: StatusCode::CONFLICT,
            error: e.to_string(),
            field: None,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: &self.error,
            field: self.field.as_deref(),
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// p-values for H0⁺: all effects ≤ 0.
    Plus,
    /// p-values for H0⁻: all effects ≥ 0.
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Advance,
    Stop,
}

/// One analyst decision, recorded at the cutoff where it was taken.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Decision {
    pub step: usize,
    pub tau: f64,
    pub action: Action,
}

struct Entry {
    session: TauSession,
    transcript: Vec<Decision>,
    touched: Instant,
}

/// Shared session store.
#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<Uuid, Arc<Mutex<Entry>>>>>,
    ttl: Duration,
}

impl AppState {
    pub fn new(ttl: Duration) -> Self {
        AppState {
            sessions: Arc::default(),
            ttl,
        }
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn evict_idle(&self) {
        let now = Instant::now();
        let mut map = self.sessions.write().expect("store lock");
        map.retain(|_, e| match e.try_lock() {
            Ok(e) => now.duration_since(e.touched) < self.ttl,
            // Busy sessions are in use, hence not idle.
            Err(_) => true,
        });
    }

    fn get(&self, id: &str) -> ApiResult<Arc<Mutex<Entry>>> {
        self.evict_idle();
        let key = Uuid::parse_str(id).map_err(|_| ApiError::not_found(id))?;
        self.sessions
            .read()
            .expect("store lock")
            .get(&key)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    fn with_entry<T>(&self, id: &str, f: impl FnOnce(&mut Entry) -> ApiResult<T>) -> ApiResult<T> {
        let cell = self.get(id)?;
        let mut entry = cell.lock().expect("session lock");
        entry.touched = Instant::now();
        f(&mut entry)
    }
}

impl Default for AppState {
    fn default() -> Self {
        AppState::new(Duration::from_secs(3600))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create))
        .route("/v1/sessions/{id}", get(view).delete(remove))
        .route("/v1/sessions/{id}/advance", post(advance))
        .route("/v1/sessions/{id}/stop", post(stop))
        .route("/v1/sessions/{id}/finalize", post(finalize))
        .route("/v1/sessions/{id}/compare", post(compare))
        .with_state(state)
}

/// Runs the service until Ctrl-C.
pub fn serve_blocking(bind: &str, port: u16, ttl_secs: u64) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((bind, port)).await?;
        eprintln!("listening on http://{}/v1", listener.local_addr()?);
        let app = router(AppState::new(Duration::from_secs(ttl_secs)));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    let text = if body.is_empty() { &b"{}"[..] } else { &body[..] };
    serde_json::from_slice(text).map_err(|e| {
        let msg = e.to_string();
        // serde names the offending field in messages like "unknown field `x`".
        let field = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.contains("field"))
            .unwrap_or("body")
            .to_string();
        ApiError::bad(&field, msg)
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    pvalues: Option<Vec<f64>>,
    records: Option<Vec<StudyRecord>>,
    side: Option<Side>,
    cutoffs: Option<Vec<f64>>,
    window: Option<f64>,
    level: Option<f64>,
    rule: Option<StoppingRule>,
}

#[derive(Serialize)]
struct Created {
    session_id: String,
    n: usize,
}

fn build_session(req: CreateRequest) -> ApiResult<TauSession> {
    let pv = match (req.pvalues, req.records) {
        (Some(_), Some(_)) => return Err(ApiError::bad("pvalues", "give either pvalues or records, not both")),
        (None, None) => return Err(ApiError::bad("pvalues", "pvalues or records is required")),
        (Some(p), None) => PValueVector::new(p).map_err(|e| ApiError::bad("pvalues", e.to_string()))?,
        (None, Some(records)) => {
            let side = req.side.ok_or_else(|| ApiError::bad("side", "side ('plus' or 'minus') is required with records"))?;
            let (plus, minus) = split_pvalues(&records).map_err(|e| ApiError::bad("records", e.to_string()))?;
            match side {
                Side::Plus => plus,
                Side::Minus => minus,
            }
        }
    };
    let d = AdaptiveConfig::default();
    let cutoffs = req.cutoffs.unwrap_or_else(|| d.cutoffs().to_vec());
    let window = req.window.unwrap_or(d.window());
    let level = req.level.unwrap_or(d.test_level());
    let cfg = AdaptiveConfig::new(cutoffs, window, level).map_err(|e| {
        let m = e.to_string();
        let field = if m.contains("window") {
            "window"
        } else if m.contains("level") {
            "level"
        } else {
            "cutoffs"
        };
        ApiError::bad(field, m)
    })?;
    Ok(TauSession::open(pv, cfg.with_rule(req.rule.unwrap_or_default())))
}

async fn create(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Created>)> {
    let session = build_session(parse_body(&body)?)?;
    let n = session.n();
    let id = Uuid::new_v4();
    state.evict_idle();
    let entry = Entry {
        session,
        transcript: Vec::new(),
        touched: Instant::now(),
    };
    state
        .sessions
        .write()
        .expect("store lock")
        .insert(id, Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(Created { session_id: id.to_string(), n })))
}

/// The masked view of a session. Carries no value at or below
/// `current_tau`; `values` is present only on request.
#[derive(Debug, Serialize)]
pub struct ViewBody {
    pub session_id: String,
    pub n: usize,
    pub step: usize,
    pub current_tau: f64,
    pub cutoffs: Vec<f64>,
    pub hidden_count: usize,
    pub visible_count: usize,
    pub window_count: usize,
    pub histogram: Vec<usize>,
    pub bin_edges: Vec<f64>,
    pub heuristic_suggestion: Suggestion,
    pub rule: StoppingRule,
    pub status: SessionStatus,
    pub chosen_tau: Option<f64>,
    pub transcript: Vec<Decision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

fn view_body(id: &str, e: &Entry, reveal: bool) -> ViewBody {
    let v = e.session.snapshot();
    ViewBody {
        session_id: id.to_string(),
        n: v.n,
        step: v.step,
        current_tau: v.current_tau,
        cutoffs: e.session.config().cutoffs().to_vec(),
        hidden_count: v.hidden_count,
        visible_count: v.visible.len(),
        window_count: v.window_count,
        histogram: v.histogram(),
        bin_edges: v.bin_edges(),
        heuristic_suggestion: v.heuristic_suggestion,
        rule: e.session.config().rule(),
        status: e.session.status(),
        chosen_tau: e.session.chosen_tau(),
        transcript: e.transcript.clone(),
        values: reveal.then_some(v.visible),
    }
}

#[derive(Debug, Deserialize)]
struct ViewQuery {
    reveal: Option<String>,
}

async fn view(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ViewQuery>,
) -> ApiResult<Json<ViewBody>> {
    let reveal = match q.reveal.as_deref() {
        None => false,
        Some("multiset") => true,
        Some(other) => return Err(ApiError::bad("reveal", format!("unknown reveal mode '{other}'"))),
    };
    state.with_entry(&id, |e| Ok(Json(view_body(&id, e, reveal))))
}

async fn remove(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    state.get(&id)?;
    let key = Uuid::parse_str(&id).map_err(|_| ApiError::not_found(&id))?;
    state.sessions.write().expect("store lock").remove(&key);
    Ok(StatusCode::NO_CONTENT)
}

async fn advance(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ViewBody>> {
    state.with_entry(&id, |e| {
        let (step, tau) = (e.session.step(), e.session.current_tau());
        e.session.advance().map_err(ApiError::conflict)?;
        e.transcript.push(Decision {
            step,
            tau,
            action: Action::Advance,
        });
        Ok(Json(view_body(&id, e, false)))
    })
}

async fn stop(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ViewBody>> {
    state.with_entry(&id, |e| {
        let (step, tau) = (e.session.step(), e.session.current_tau());
        e.session.stop().map_err(ApiError::conflict)?;
        e.transcript.push(Decision {
            step,
            tau,
            action: Action::Stop,
        });
        Ok(Json(view_body(&id, e, false)))
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FinalizeRequest {
    method: String,
    #[serde(default)]
    options: Option<Value>,
}

fn test_setup(req: FinalizeRequest) -> ApiResult<(GlobalMethod, TestOptions)> {
    let method: GlobalMethod = req.method.parse().map_err(|e: condmt::Error| ApiError::bad("method", e.to_string()))?;
    let opts: TestOptions = match req.options {
        None | Some(Value::Null) => TestOptions::default(),
        Some(v) => serde_json::from_value(v).map_err(|e| ApiError::bad("options", e.to_string()))?,
    };
    opts.validate(method).map_err(|e| ApiError::bad("options", e.to_string()))?;
    Ok((method, opts))
}

async fn finalize(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<CombinedResult>> {
    let cell = state.get(&id)?;
    let (method, opts) = test_setup(parse_body(&body)?)?;
    let mut e = cell.lock().expect("session lock");
    e.touched = Instant::now();
    let r = e.session.finalize(method, &opts).map_err(ApiError::conflict)?;
    Ok(Json(r))
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub conditional: CombinedResult,
    pub unconditional: CombinedResult,
}

async fn compare(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Comparison>> {
    let cell = state.get(&id)?;
    let (method, opts) = test_setup(parse_body(&body)?)?;
    let mut e = cell.lock().expect("session lock");
    e.touched = Instant::now();
    let conditional = e.session.finalize(method, &opts).map_err(ApiError::conflict)?;
    let unconditional = e.session.unconditional(method, &opts).map_err(ApiError::conflict)?;
    Ok(Json(Comparison {
        conditional,
        unconditional,
    }))
}
