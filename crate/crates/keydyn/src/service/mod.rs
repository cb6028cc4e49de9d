//! HTTP API: enroll samples, train a per-user model, authenticate attempts and
//! fetch rendered previews. All routes live under `/api/v1`.

pub mod store;

use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;

use keydyn_core::features::{extract_features, FeatureLayout};
use keydyn_core::neural::{Decision, Verdict};
use keydyn_core::pipeline::UserPipeline;
use keydyn_core::sample::{parse_record, IngestError, KeystrokeSample, Label, DEFAULT_PIN_LENGTH};

use crate::artifacts;
use crate::training::{surrogate_imposters, train_user, ImposterSource, TrainParams, TrainSummary};
use store::{valid_user_id, AuditEvent, Store};

pub const DEFAULT_MIN_SAMPLES: usize = 50;
pub const DEFAULT_PREVIEW_TTL: Duration = Duration::from_secs(3600);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub pin_length: usize,
    pub min_samples: usize,
    pub preview_ttl: Duration,
    pub train_defaults: TrainParams,
    pub ui_dir: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            pin_length: DEFAULT_PIN_LENGTH,
            min_samples: DEFAULT_MIN_SAMPLES,
            preview_ttl: DEFAULT_PREVIEW_TTL,
            train_defaults: TrainParams::default(),
            ui_dir: None,
        }
    }
}

struct ModelSnapshot {
    pipeline: UserPipeline,
    version: u64,
}

struct UserSlot {
    /// Serializes log appends and buffer updates for this user.
    window: tokio::sync::Mutex<VecDeque<Vec<f64>>>,
    model: RwLock<Option<Arc<ModelSnapshot>>>,
    training: AtomicBool,
}

struct Preview {
    created: Instant,
    png: Arc<Vec<u8>>,
}

pub struct AppState {
    store: Store,
    config: ServiceConfig,
    layout: FeatureLayout,
    users: Mutex<HashMap<String, Arc<UserSlot>>>,
    previews: Mutex<HashMap<String, Preview>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> std::io::Result<Arc<Self>> {
        let layout = FeatureLayout::new(config.pin_length)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
        Ok(Arc::new(Self {
            store: Store::open(&config.data_dir)?,
            config,
            layout,
            users: Mutex::new(HashMap::new()),
            previews: Mutex::new(HashMap::new()),
        }))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn slot(&self, id: &str) -> Arc<UserSlot> {
        let mut users = self.users.lock().expect("user table poisoned");
        users
            .entry(id.to_string())
            .or_insert_with(|| {
                let model = match artifacts::load(&self.store.model_dir(id)) {
                    Ok((pipeline, version)) => Some(Arc::new(ModelSnapshot { pipeline, version })),
                    Err(artifacts::ArtifactError::Missing(_)) => None,
                    Err(e) => {
                        log::error!("{id}: cannot load model: {e}");
                        None
                    }
                };
                let window = self.store.load_window(id).unwrap_or_default();
                Arc::new(UserSlot {
                    window: tokio::sync::Mutex::new(window.into()),
                    model: RwLock::new(model),
                    training: AtomicBool::new(false),
                })
            })
            .clone()
    }

    fn put_preview(&self, png: Vec<u8>) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let mut previews = self.previews.lock().expect("preview table poisoned");
        let ttl = self.config.preview_ttl;
        previews.retain(|_, p| p.created.elapsed() < ttl);
        previews.insert(
            id.clone(),
            Preview {
                created: Instant::now(),
                png: Arc::new(png),
            },
        );
        id
    }

    fn get_preview(&self, id: &str) -> Option<Arc<Vec<u8>>> {
        let previews = self.previews.lock().expect("preview table poisoned");
        previews
            .get(id)
            .filter(|p| p.created.elapsed() < self.config.preview_ttl)
            .map(|p| p.png.clone())
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<&'static str>,
    event_index: Option<usize>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            field: None,
            event_index: None,
        }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(f) = self.field {
            body["field"] = json!(f);
        }
        if let Some(i) = self.event_index {
            body["event_index"] = json!(i);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn check_user(id: &str) -> ApiResult<()> {
    if valid_user_id(id) {
        Ok(())
    } else {
        Err(ApiError::new(StatusCode::BAD_REQUEST, format!("invalid user id {id:?}")))
    }
}

/// Parse and validate a sample body: 400 for schema problems, 422 for invariant violations.
fn parse_sample(state: &AppState, id: &str, body: &[u8]) -> ApiResult<KeystrokeSample> {
    let text = std::str::from_utf8(body).map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "body is not UTF-8"))?;
    let mut sample = parse_record(text).map_err(|e| match e {
        IngestError::Json { source, .. } => ApiError::new(StatusCode::BAD_REQUEST, source.to_string()),
        other => ApiError::new(StatusCode::BAD_REQUEST, other.to_string()),
    })?;
    sample.validate(state.config.pin_length).map_err(|e| ApiError {
        status: StatusCode::UNPROCESSABLE_ENTITY,
        message: e.to_string(),
        field: Some(e.field()),
        event_index: e.event_index(),
    })?;
    sample.user_id = id.to_string();
    Ok(sample)
}

#[derive(Serialize)]
struct EnrollResponse {
    accepted: bool,
    sample_count: usize,
}

async fn post_sample(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<EnrollResponse>> {
    check_user(&id)?;
    let mut sample = parse_sample(&state, &id, &body)?;
    if sample.label == Label::Unlabeled {
        sample.label = Label::Genuine;
    }
    let slot = state.slot(&id);
    let _guard = slot.window.lock().await;
    state.store.append_sample(&id, &sample).map_err(ApiError::internal)?;
    let count = state.store.read_samples(&id).map_err(ApiError::internal)?.len();
    Ok(Json(EnrollResponse {
        accepted: true,
        sample_count: count,
    }))
}

#[derive(Serialize)]
struct StatusResponse {
    user: String,
    sample_count: usize,
    trained: bool,
    model_version: Option<u64>,
    threshold: Option<f64>,
    training: bool,
}

async fn get_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<StatusResponse>> {
    check_user(&id)?;
    let slot = state.slot(&id);
    let model = slot.model.read().expect("model slot poisoned").clone();
    Ok(Json(StatusResponse {
        sample_count: state.store.read_samples(&id).map_err(ApiError::internal)?.len(),
        trained: model.is_some(),
        model_version: model.as_ref().map(|m| m.version),
        threshold: model.as_ref().and_then(|m| m.pipeline.threshold()),
        training: slot.training.load(Ordering::SeqCst),
        user: id,
    }))
}

/// Clears the per-user training flag when training ends, however it ends.
struct TrainingFlag(Arc<UserSlot>);

impl Drop for TrainingFlag {
    fn drop(&mut self) {
        self.0.training.store(false, Ordering::SeqCst);
    }
}

#[derive(Serialize)]
struct TrainResponse {
    user: String,
    model_version: u64,
    #[serde(flatten)]
    summary: TrainSummary,
    preview_id: Option<String>,
}

fn vectors_of(samples: &[KeystrokeSample], layout: &FeatureLayout) -> Vec<Vec<f64>> {
    samples
        .iter()
        .filter_map(|s| extract_features(s).ok())
        .map(|v| v.values)
        .filter(|v| v.len() == layout.dim())
        .collect()
}

async fn train(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<TrainResponse>> {
    check_user(&id)?;
    let params: TrainParams = if body.iter().all(u8::is_ascii_whitespace) {
        state.config.train_defaults
    } else {
        let overrides: serde_json::Value =
            serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
        let mut merged = serde_json::to_value(state.config.train_defaults).map_err(ApiError::internal)?;
        match (merged.as_object_mut(), overrides) {
            (Some(base), serde_json::Value::Object(o)) => base.extend(o),
            _ => return Err(ApiError::new(StatusCode::BAD_REQUEST, "training parameters must be a JSON object")),
        }
        serde_json::from_value(merged).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?
    };
    let slot = state.slot(&id);
    if slot
        .training
        .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
        .is_err()
    {
        return Err(ApiError::new(StatusCode::CONFLICT, format!("training already running for {id}")));
    }
    let _flag = TrainingFlag(slot.clone());

    let samples = {
        let _guard = slot.window.lock().await;
        state.store.read_samples(&id).map_err(ApiError::internal)?
    };
    if samples.len() < state.config.min_samples {
        return Err(ApiError::new(
            StatusCode::PRECONDITION_FAILED,
            format!("{} samples enrolled, {} required", samples.len(), state.config.min_samples),
        ));
    }
    let genuine = vectors_of(&samples, &state.layout);
    let mut imposters = Vec::new();
    for other in state.store.users().map_err(ApiError::internal)? {
        if other != id {
            imposters.extend(vectors_of(&state.store.read_samples(&other).map_err(ApiError::internal)?, &state.layout));
        }
    }
    let (imposters, source) = if imposters.is_empty() {
        let surrogate = surrogate_imposters(state.config.pin_length, genuine.len(), params.seed)
            .map_err(ApiError::internal)?;
        (surrogate, ImposterSource::Synthetic)
    } else {
        (imposters, ImposterSource::Enrolled)
    };

    let layout = state.layout;
    let trained = tokio::task::spawn_blocking(move || train_user(layout, &genuine, imposters, source, &params))
        .await
        .map_err(ApiError::internal)?
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))?;

    let version = slot
        .model
        .read()
        .expect("model slot poisoned")
        .as_ref()
        .map_or(1, |m| m.version + 1);
    let preview_id = match &trained.preview {
        Some(img) => Some(state.put_preview(img.to_png())),
        None => None,
    };
    {
        let mut window = slot.window.lock().await;
        artifacts::save(&state.store.model_dir(&id), &trained.pipeline, version).map_err(ApiError::internal)?;
        state.store.save_window(&id, &trained.window).map_err(ApiError::internal)?;
        *window = trained.window.clone().into();
        *slot.model.write().expect("model slot poisoned") = Some(Arc::new(ModelSnapshot {
            pipeline: trained.pipeline,
            version,
        }));
    }
    log::info!("{id}: trained model version {version}");
    Ok(Json(TrainResponse {
        user: id,
        model_version: version,
        summary: trained.summary,
        preview_id,
    }))
}

#[derive(Serialize)]
struct AuthResponse {
    verdict: Verdict,
    score: f64,
    decision_value: f64,
    image_id: Option<String>,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

async fn authenticate(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<AuthResponse>> {
    check_user(&id)?;
    let slot = state.slot(&id);
    let Some(model) = slot.model.read().expect("model slot poisoned").clone() else {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("no trained model for {id}")));
    };
    let sample = parse_sample(&state, &id, &body)?;
    let raw = extract_features(&sample)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?
        .values;

    let mut window = slot.window.lock().await;
    let pipe = &model.pipeline;
    let history_len = pipe.state.config.buffer - 1;
    if window.len() < history_len {
        return Err(ApiError::internal("buffer history is incomplete; retrain the model"));
    }
    let history: Vec<Vec<f64>> = window
        .iter()
        .skip(window.len() - history_len)
        .map(|v| pipe.state.scale(v))
        .collect::<Result<_, _>>()
        .map_err(ApiError::internal)?;
    let latest = pipe.state.scale(&raw).map_err(ApiError::internal)?;
    let vector = pipe.state.window(&history, &latest).map_err(ApiError::internal)?;
    let score = pipe.score_vector(&vector).map_err(ApiError::internal)?;
    let threshold = pipe
        .threshold()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "model is not calibrated"))?;
    let decision = Decision::from_score(score, threshold);
    let image_id = match pipe.state.encode(&vector).map_err(ApiError::internal)? {
        Some(img) => Some(state.put_preview(img.to_png())),
        None => None,
    };
    let accepted = decision.verdict == Verdict::Accept;
    state
        .store
        .append_audit(&AuditEvent {
            timestamp_ms: now_ms(),
            user: id.clone(),
            score,
            decision_value: decision.decision_value,
            verdict: if accepted { "accept" } else { "reject" }.into(),
            severity: if accepted { "info" } else { "alert" }.into(),
            image_id: image_id.clone(),
        })
        .map_err(ApiError::internal)?;
    if accepted {
        window.push_back(raw);
        while window.len() > history_len {
            window.pop_front();
        }
        let snapshot: Vec<Vec<f64>> = window.iter().cloned().collect();
        if let Err(e) = state.store.save_window(&id, &snapshot) {
            log::warn!("{id}: cannot persist buffer history: {e}");
        }
    }
    Ok(Json(AuthResponse {
        verdict: decision.verdict,
        score,
        decision_value: decision.decision_value,
        image_id,
    }))
}

async fn preview(State(state): State<Arc<AppState>>, Path((id, image_id)): Path<(String, String)>) -> ApiResult<Response> {
    check_user(&id)?;
    match state.get_preview(&image_id) {
        Some(png) => Ok(([(header::CONTENT_TYPE, "image/png")], png.as_ref().clone()).into_response()),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown or expired image {image_id}"))),
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/users/{id}", get(get_status))
        .route("/api/v1/users/{id}/samples", post(post_sample))
        .route("/api/v1/users/{id}/train", post(train))
        .route("/api/v1/users/{id}/authenticate", post(authenticate))
        .route("/api/v1/users/{id}/preview/{image_id}", get(preview));
    let api = match &state.config.ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    };
    api.with_state(state)
}
