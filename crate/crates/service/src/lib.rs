//! HTTP service: avatar sessions, chat and content generation, video
//! retrieval and profiler metrics.
//!
//! | Method | Path                              | Body / result                          |
//! |--------|-----------------------------------|----------------------------------------|
//! | POST   | `/sessions`                       | PNG (raw or form field `image`)        |
//! | GET    | `/sessions/{id}`                  | face box and conversation context      |
//! | POST   | `/sessions/{id}/chat?fps=N`       | JSON `{"text"}`, WAV, or form          |
//! | POST   | `/sessions/{id}/content?fps=N`    | same shapes as chat                    |
//! | GET    | `/videos/{id}`                    | UVID bytes                             |
//! | GET    | `/videos/{id}/manifest`           | header fields and frame URLs           |
//! | GET    | `/videos/{id}/preview`            | PNG of frame 0                         |
//! | GET    | `/videos/{id}/frames/{n}`         | PNG of frame `n`                       |
//! | GET    | `/videos/{id}/audio`              | WAV of the audio track                 |
//! | GET    | `/metrics`                        | profiler report JSON                   |
//! | GET    | `/healthz`                        | status and initialisation state        |
//!
//! Errors use the envelope `{"error": code, "message": text}`. Each session
//! serves one request at a time; a second concurrent request gets 409.

pub mod error;
pub mod input;
pub mod store;

use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, RawQuery, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use utalk_core::codec::{encode_png, encode_wav};
use utalk_core::config::Config;
use utalk_core::orchestrator::{AvatarSession, Engine, EngineCell};
use utalk_core::profiler::{ProfileReportJson, Profiler};
use utalk_core::renderer::{UvidHeader, VideoFile};
use utalk_core::types::{FaceBox, FrameRate};
use utalk_core::{Error, Result};

use crate::error::ApiError;
use crate::store::VideoStore;

pub use crate::error::ErrorBody;
pub use crate::input::MAX_UPLOAD_BYTES;

type SessionSlot = Arc<Mutex<AvatarSession>>;

/// Shared state behind every handler.
pub struct AppState {
    config: Config,
    cell: Arc<EngineCell>,
    profiler: Arc<Profiler>,
    sessions: RwLock<HashMap<String, SessionSlot>>,
    store: VideoStore,
}

impl AppState {
    /// Opens the video store; the engine is built on first use.
    pub fn new(config: Config) -> Result<Self> {
        Self::with_cell(config, Arc::new(EngineCell::new()))
    }

    pub fn with_cell(config: Config, cell: Arc<EngineCell>) -> Result<Self> {
        config.validate()?;
        let store = VideoStore::open(&config.video_dir)?;
        Ok(Self {
            config,
            cell,
            profiler: Arc::new(Profiler::new()),
            sessions: RwLock::new(HashMap::new()),
            store,
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn cell(&self) -> &Arc<EngineCell> {
        &self.cell
    }

    pub fn store(&self) -> &VideoStore {
        &self.store
    }

    pub fn profiler(&self) -> &Arc<Profiler> {
        &self.profiler
    }

    /// Builds the engine now, blocking the caller.
    pub fn initialize(&self) -> Result<Arc<Engine>> {
        self.cell.get_or_init_with(&self.config, Arc::clone(&self.profiler))
    }

    async fn engine(self: &Arc<Self>) -> std::result::Result<Arc<Engine>, ApiError> {
        if let Some(e) = self.cell.get() {
            return Ok(e);
        }
        let state = Arc::clone(self);
        blocking(move || state.initialize()).await
    }

    fn session(&self, id: &str) -> std::result::Result<SessionSlot, ApiError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> std::result::Result<T, ApiError> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub face_box: FaceBox,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExchangeView {
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub face_box: FaceBox,
    pub context: Vec<ExchangeView>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoSummary {
    pub width: u32,
    pub height: u32,
    pub fps: u32,
    pub frame_count: u32,
    pub audio_sample_rate: u32,
    pub audio_sample_count: u64,
}

impl From<&UvidHeader> for VideoSummary {
    fn from(h: &UvidHeader) -> Self {
        Self {
            width: h.width,
            height: h.height,
            fps: h.fps as u32,
            frame_count: h.frame_count,
            audio_sample_rate: h.audio_sample_rate,
            audio_sample_count: h.audio_sample_count,
        }
    }
}

/// Result of a chat or content request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobResult {
    pub video_id: String,
    pub transcript: Option<String>,
    pub answer: Option<String>,
    pub timings: BTreeMap<String, f64>,
    pub video: VideoSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoManifest {
    pub video_id: String,
    #[serde(flatten)]
    pub video: VideoSummary,
    pub duration_s: f64,
    pub frames: Vec<String>,
    pub audio: String,
    pub preview: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub initialized: bool,
    pub init_count: u64,
    pub sessions: usize,
    pub videos: usize,
}

/// `fps` from the query string, or the configured default.
fn requested_fps(query: Option<&str>, default: FrameRate) -> std::result::Result<FrameRate, ApiError> {
    let Some(q) = query else { return Ok(default) };
    let mut fps = default;
    for pair in q.split('&') {
        let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
        if k == "fps" {
            let n: u32 = v
                .parse()
                .map_err(|_| ApiError::bad_request("invalid_fps", format!("fps must be an integer, got {v:?}")))?;
            fps = FrameRate::new(n)?;
        }
    }
    Ok(fps)
}

async fn create_session(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Body) -> std::result::Result<Json<SessionCreated>, ApiError> {
    let png = input::image_upload(&headers, body).await?;
    let engine = state.engine().await?;
    let session = blocking(move || engine.create_session(&png)).await?;
    let created = SessionCreated {
        session_id: session.id().to_owned(),
        face_box: session.face_box(),
        width: session.avatar().width(),
        height: session.avatar().height(),
    };
    state
        .sessions
        .write()
        .insert(created.session_id.clone(), Arc::new(Mutex::new(session)));
    tracing::info!(session = %created.session_id, "session created");
    Ok(Json(created))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> std::result::Result<Json<SessionView>, ApiError> {
    let slot = state.session(&id)?;
    let session = slot
        .try_lock()
        .map_err(|_| ApiError::from(Error::Busy(format!("session {id} has a request in flight"))))?;
    Ok(Json(SessionView {
        session_id: id,
        face_box: session.face_box(),
        context: session
            .context()
            .exchanges()
            .map(|x| ExchangeView {
                question: x.question().into(),
                answer: x.answer().into(),
            })
            .collect(),
    }))
}

#[derive(Clone, Copy)]
enum Mode {
    Chat,
    Content,
}

async fn run_job(state: Arc<AppState>, id: String, query: Option<String>, headers: HeaderMap, body: Body, mode: Mode) -> std::result::Result<Json<JobResult>, ApiError> {
    let slot = state.session(&id)?;
    let mut session = slot
        .try_lock_owned()
        .map_err(|_| ApiError::from(Error::Busy(format!("session {id} has a request in flight"))))?;
    let utterance = input::utterance(&headers, body).await?;
    let engine = state.engine().await?;
    let fps = requested_fps(query.as_deref(), engine.default_fps())?;
    let store_state = Arc::clone(&state);
    let result = blocking(move || {
        let (video, transcript, answer, timings) = match mode {
            Mode::Chat => {
                let out = engine.chat(&mut session, &utterance, fps)?;
                (out.video, Some(out.transcript.text().to_owned()), Some(out.answer), out.timings)
            }
            Mode::Content => {
                let out = engine.content(&session, &utterance, fps)?;
                (out.video, out.transcript.map(|t| t.text().to_owned()), None, out.timings)
            }
        };
        let video_id = store_state.store.put(&video)?;
        Ok(JobResult {
            video_id,
            transcript,
            answer,
            timings,
            video: VideoSummary::from(video.header()),
        })
    })
    .await?;
    Ok(Json(result))
}

async fn chat(State(state): State<Arc<AppState>>, Path(id): Path<String>, RawQuery(q): RawQuery, headers: HeaderMap, body: Body) -> std::result::Result<Json<JobResult>, ApiError> {
    run_job(state, id, q, headers, body, Mode::Chat).await
}

async fn content(State(state): State<Arc<AppState>>, Path(id): Path<String>, RawQuery(q): RawQuery, headers: HeaderMap, body: Body) -> std::result::Result<Json<JobResult>, ApiError> {
    run_job(state, id, q, headers, body, Mode::Content).await
}

fn with_type(bytes: Vec<u8>, content_type: &'static str) -> Response {
    ([(header::CONTENT_TYPE, HeaderValue::from_static(content_type))], bytes).into_response()
}

async fn load_video(state: &Arc<AppState>, id: &str) -> std::result::Result<VideoFile, ApiError> {
    if state.store.get(id).is_none() {
        return Err(ApiError::not_found("video", id));
    }
    let state = Arc::clone(state);
    let id = id.to_owned();
    blocking(move || state.store.load(&id).expect("entry checked above")).await
}

async fn video_bytes(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> std::result::Result<Response, ApiError> {
    if state.store.get(&id).is_none() {
        return Err(ApiError::not_found("video", &id));
    }
    let s = Arc::clone(&state);
    let bytes = blocking(move || s.store.read_bytes(&id).expect("entry checked above")).await?;
    Ok(with_type(bytes, "application/octet-stream"))
}

async fn frame_png(state: &Arc<AppState>, id: &str, n: u32) -> std::result::Result<Response, ApiError> {
    let video = load_video(state, id).await?;
    if n >= video.frame_count() {
        return Err(ApiError::not_found("frame", &format!("{id}/{n}")));
    }
    let frame = video
        .frame(n)
        .ok_or_else(|| ApiError::not_found("frame", &format!("{id}/{n}")))?;
    let png = blocking(move || encode_png(&frame)).await?;
    Ok(with_type(png, "image/png"))
}

async fn video_preview(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> std::result::Result<Response, ApiError> {
    frame_png(&state, &id, 0).await
}

async fn video_frame(State(state): State<Arc<AppState>>, Path((id, n)): Path<(String, String)>) -> std::result::Result<Response, ApiError> {
    let n: u32 = n.parse().map_err(|_| ApiError::not_found("frame", &format!("{id}/{n}")))?;
    frame_png(&state, &id, n).await
}

async fn video_audio(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> std::result::Result<Response, ApiError> {
    let video = load_video(&state, &id).await?;
    let wav = blocking(move || encode_wav(&video.audio())).await?;
    Ok(with_type(wav, "audio/wav"))
}

async fn video_manifest(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> std::result::Result<Json<VideoManifest>, ApiError> {
    let entry = state.store.get(&id).ok_or_else(|| ApiError::not_found("video", &id))?;
    let h = entry.header;
    Ok(Json(VideoManifest {
        frames: (0..h.frame_count).map(|n| format!("/videos/{id}/frames/{n}")).collect(),
        audio: format!("/videos/{id}/audio"),
        preview: format!("/videos/{id}/preview"),
        duration_s: h.audio_sample_count as f64 / h.audio_sample_rate as f64,
        video: VideoSummary::from(&h),
        video_id: id,
    }))
}

async fn metrics(State(state): State<Arc<AppState>>) -> Json<ProfileReportJson> {
    Json(state.profiler.report().to_json())
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        initialized: state.cell.is_initialized(),
        init_count: state.cell.init_count(),
        sessions: state.sessions.read().len(),
        videos: state.store.len(),
    })
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

fn cors(origin: &str) -> CorsLayer {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    match origin.trim() {
        "*" | "" => layer.allow_origin(Any),
        list => {
            let origins: Vec<HeaderValue> = list
                .split(',')
                .filter_map(|o| HeaderValue::from_str(o.trim()).ok())
                .collect();
            layer.allow_origin(AllowOrigin::list(origins))
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = cors(&state.config.cors_origin);
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/chat", post(chat))
        .route("/sessions/{id}/content", post(content))
        .route("/videos/{id}", get(video_bytes))
        .route("/videos/{id}/manifest", get(video_manifest))
        .route("/videos/{id}/preview", get(video_preview))
        .route("/videos/{id}/frames/{n}", get(video_frame))
        .route("/videos/{id}/audio", get(video_audio))
        .route("/metrics", get(metrics))
        .route("/healthz", get(healthz))
        .fallback(fallback)
        .layer(axum::extract::DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .layer(cors)
        .with_state(state)
}

/// Serves `state` on `listener` until `shutdown` resolves.
pub async fn serve(state: Arc<AppState>, listener: tokio::net::TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fps_query_parsing() {
        let d = FrameRate::new(20).unwrap();
        assert_eq!(requested_fps(None, d).unwrap(), d);
        assert_eq!(requested_fps(Some("fps=25"), d).unwrap().get(), 25);
        assert_eq!(requested_fps(Some("x=1&fps=16"), d).unwrap().get(), 16);
        assert_eq!(requested_fps(Some("fps=99"), d).unwrap_err().status, StatusCode::BAD_REQUEST);
        assert_eq!(requested_fps(Some("fps=abc"), d).unwrap_err().code, "invalid_fps");
    }

    #[test]
    fn error_statuses() {
        use crate::error::status_for;
        assert_eq!(status_for(&Error::SilentInput { words: 1 }), StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(status_for(&Error::NoFace { best: 0.1 }), StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(status_for(&Error::ImageDecode("x".into())), StatusCode::BAD_REQUEST);
        assert_eq!(status_for(&Error::Busy("x".into())), StatusCode::CONFLICT);
        assert_eq!(
            status_for(&Error::Upstream { stage: "llm", message: "x".into() }),
            StatusCode::BAD_GATEWAY
        );
    }
}
