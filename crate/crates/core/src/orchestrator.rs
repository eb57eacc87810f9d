//! Two-phase engine: initialise stage adapters and render assets once,
//! then serve many chat and content requests against avatar sessions.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Instant, SystemTime};

use once_cell::sync::OnceCell;
use serde::Serialize;

use crate::codec::decode_png;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::fixtures::{default_registry, face_template_region, synthetic_avatar, FIXTURE_PHRASES};
use crate::profiler::Profiler;
use crate::renderer::{detect_face, render_video, Detector, RenderConfig, VideoFile};
use crate::stages::{
    build_prompt, validate_transcript, AsrAdapter, ConversationContext, LlmAdapter, Secret,
    ToneTable, TtsAdapter,
};
use crate::types::{AudioBuffer, FaceBox, FrameRate, ImageBuffer, Transcript};

/// Smallest accepted avatar edge.
pub const MIN_AVATAR_EDGE: u32 = 64;

/// A user turn: typed text or recorded speech.
#[derive(Debug, Clone, PartialEq)]
pub enum Utterance {
    Text(String),
    Audio(AudioBuffer),
}

#[derive(Debug, Clone)]
pub struct AvatarSession {
    id: String,
    avatar: ImageBuffer,
    face_box: FaceBox,
    context: ConversationContext,
    created_at: SystemTime,
}

impl AvatarSession {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn avatar(&self) -> &ImageBuffer {
        &self.avatar
    }

    pub fn face_box(&self) -> FaceBox {
        self.face_box
    }

    pub fn context(&self) -> &ConversationContext {
        &self.context
    }

    pub fn created_at(&self) -> SystemTime {
        self.created_at
    }
}

/// Wall seconds spent per pipeline stage of one request.
pub type StageTimings = BTreeMap<String, f64>;

#[derive(Debug, Clone)]
pub struct ChatOutcome {
    pub transcript: Transcript,
    pub answer: String,
    pub video: VideoFile,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct ContentOutcome {
    /// Present only for audio input that the recogniser could transcribe.
    pub transcript: Option<Transcript>,
    pub video: VideoFile,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, Serialize)]
pub struct EngineInfo {
    pub asr_model: String,
    pub llm_model: String,
    pub tts_model: String,
    pub render: RenderConfig,
}

/// Shared, read-only pipeline state built once per process.
pub struct Engine {
    config: Config,
    asr: AsrAdapter,
    llm: LlmAdapter,
    tts: TtsAdapter,
    tones: Arc<ToneTable>,
    profiler: Arc<Profiler>,
    initialized_at: SystemTime,
    in_flight: AtomicUsize,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("asr", &self.asr.model_label())
            .field("llm", &self.llm.model_label())
            .field("tts", &self.tts.model_label())
            .field("initialized_at", &self.initialized_at)
            .finish_non_exhaustive()
    }
}

/// Decrements the in-flight counter on drop.
pub struct JobGuard<'a>(&'a AtomicUsize);

impl Drop for JobGuard<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

fn credential(var: &str) -> Option<Secret> {
    std::env::var(var).ok().filter(|v| !v.is_empty()).map(Secret::new)
}

fn elapsed_s(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

impl Engine {
    /// Builds adapters and render assets, then primes the render path with
    /// one short render so the first request does not pay first-touch costs.
    pub fn build(config: &Config, profiler: Arc<Profiler>) -> Result<Self> {
        config.validate()?;
        let started = Instant::now();
        let tones = Arc::new(ToneTable::new());
        let asr = match config.asr.http_endpoint("asr", credential("UTALK_ASR_KEY"))? {
            Some(ep) => AsrAdapter::http(ep),
            None => AsrAdapter::stub(default_registry(&tones)),
        };
        let llm = match config.llm.http_endpoint("llm", credential("UTALK_LLM_KEY"))? {
            Some(ep) => LlmAdapter::http(ep),
            None => LlmAdapter::stub(),
        }
        .with_brevity_prompt(config.brevity_prompt.clone())?;
        let tts = match config.tts.http_endpoint("tts", credential("UTALK_TTS_KEY"))? {
            Some(ep) => TtsAdapter::http(ep),
            None => TtsAdapter::stub(Arc::clone(&tones)),
        };
        let engine = Self {
            config: config.clone(),
            asr,
            llm,
            tts,
            tones,
            profiler,
            initialized_at: SystemTime::now(),
            in_flight: AtomicUsize::new(0),
        };
        engine.prime()?;
        let ns = u64::try_from(started.elapsed().as_nanos()).unwrap_or(u64::MAX);
        engine.profiler.record("initialize", ns);
        Ok(engine)
    }

    fn prime(&self) -> Result<()> {
        let edge = MIN_AVATAR_EDGE;
        let avatar = synthetic_avatar(edge, edge);
        let face_box = detect_face(
            &avatar,
            &avatar.crop(face_template_region(edge, edge))?,
            Detector::HeavyExhaustive,
            None,
        )?;
        let audio = self.tones.synthesize(FIXTURE_PHRASES[0]);
        let scratch = Profiler::new();
        render_video(&avatar, face_box, &audio, &self.config.render, &scratch, None)?;
        Ok(())
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn profiler(&self) -> &Arc<Profiler> {
        &self.profiler
    }

    pub fn tones(&self) -> &Arc<ToneTable> {
        &self.tones
    }

    pub fn asr(&self) -> &AsrAdapter {
        &self.asr
    }

    pub fn llm(&self) -> &LlmAdapter {
        &self.llm
    }

    pub fn tts(&self) -> &TtsAdapter {
        &self.tts
    }

    pub fn initialized_at(&self) -> SystemTime {
        self.initialized_at
    }

    pub fn default_fps(&self) -> FrameRate {
        self.config.render.fps
    }

    pub fn info(&self) -> EngineInfo {
        EngineInfo {
            asr_model: self.asr.model_label().into(),
            llm_model: self.llm.model_label().into(),
            tts_model: self.tts.model_label().into(),
            render: self.config.render,
        }
    }

    /// Requests currently executing on this engine.
    pub fn jobs_in_flight(&self) -> usize {
        self.in_flight.load(Ordering::SeqCst)
    }

    pub fn begin_job(&self) -> JobGuard<'_> {
        self.in_flight.fetch_add(1, Ordering::SeqCst);
        JobGuard(&self.in_flight)
    }

    pub fn create_session(&self, png: &[u8]) -> Result<AvatarSession> {
        self.session_from_image(decode_png(png)?)
    }

    /// Locates the face once with the exhaustive detector.
    pub fn session_from_image(&self, avatar: ImageBuffer) -> Result<AvatarSession> {
        if avatar.width() < MIN_AVATAR_EDGE || avatar.height() < MIN_AVATAR_EDGE {
            return Err(Error::ImageDecode(format!(
                "avatar is {}x{}, minimum is {MIN_AVATAR_EDGE}x{MIN_AVATAR_EDGE}",
                avatar.width(),
                avatar.height()
            )));
        }
        let template = avatar.crop(face_template_region(avatar.width(), avatar.height()))?;
        let face_box = self.profiler.time("create_session", || {
            detect_face(&avatar, &template, Detector::HeavyExhaustive, None)
        })?;
        Ok(AvatarSession {
            id: uuid::Uuid::new_v4().to_string(),
            avatar,
            face_box,
            context: ConversationContext::new(),
            created_at: SystemTime::now(),
        })
    }

    fn render(&self, session: &AvatarSession, audio: &AudioBuffer, fps: FrameRate) -> Result<VideoFile> {
        let cfg = self.config.render.with_fps(fps);
        render_video(&session.avatar, session.face_box, audio, &cfg, &self.profiler, None)
    }

    /// Question in, answered video out. The session context is updated only
    /// after the whole pipeline succeeds.
    pub fn chat(&self, session: &mut AvatarSession, input: &Utterance, fps: FrameRate) -> Result<ChatOutcome> {
        let _job = self.begin_job();
        let mut timings = StageTimings::new();
        let transcript = match input {
            Utterance::Text(text) => validate_transcript(text)?,
            Utterance::Audio(audio) => {
                let t = Instant::now();
                let text = self.profiler.time("transcribe", || self.asr.transcribe(audio))?;
                timings.insert("asr".into(), elapsed_s(t));
                validate_transcript(&text)?
            }
        };
        let prompt = build_prompt(&session.context, self.llm.brevity_prompt(), transcript.text())?;
        let t = Instant::now();
        let answer = self.profiler.time("complete", || self.llm.complete(&prompt))?;
        timings.insert("llm".into(), elapsed_s(t));
        let t = Instant::now();
        let speech = self.profiler.time("synthesize", || self.tts.synthesize(&answer))?;
        timings.insert("tts".into(), elapsed_s(t));
        let t = Instant::now();
        let video = self.render(session, &speech, fps)?;
        timings.insert("render".into(), elapsed_s(t));
        session.context.push(transcript.text(), answer.clone())?;
        Ok(ChatOutcome {
            transcript,
            answer,
            video,
            timings,
        })
    }

    /// Renders the input itself without the language model. Audio input is
    /// transcribed on a best-effort basis for display only.
    pub fn content(&self, session: &AvatarSession, input: &Utterance, fps: FrameRate) -> Result<ContentOutcome> {
        let _job = self.begin_job();
        let mut timings = StageTimings::new();
        let (speech, transcript) = match input {
            Utterance::Text(text) => {
                let transcript = validate_transcript(text)?;
                let t = Instant::now();
                let speech = self.profiler.time("synthesize", || self.tts.synthesize(transcript.text()))?;
                timings.insert("tts".into(), elapsed_s(t));
                (std::borrow::Cow::Owned(speech), None)
            }
            Utterance::Audio(audio) => {
                if audio.is_empty() {
                    return Err(Error::EmptyAudio);
                }
                let transcript = self.asr.transcribe(audio).ok().map(Transcript::new);
                (std::borrow::Cow::Borrowed(audio), transcript)
            }
        };
        let t = Instant::now();
        let video = self.render(session, &speech, fps)?;
        timings.insert("render".into(), elapsed_s(t));
        Ok(ContentOutcome {
            transcript,
            video,
            timings,
        })
    }
}

/// Lazily built engine; the first successful initialisation wins and later
/// calls return the same instance.
pub struct EngineCell {
    cell: OnceCell<Arc<Engine>>,
    init_count: AtomicU64,
}

impl Default for EngineCell {
    fn default() -> Self {
        Self::new()
    }
}

impl EngineCell {
    pub const fn new() -> Self {
        Self {
            cell: OnceCell::new(),
            init_count: AtomicU64::new(0),
        }
    }

    pub fn get_or_init(&self, config: &Config) -> Result<Arc<Engine>> {
        self.get_or_init_with(config, Arc::new(Profiler::new()))
    }

    pub fn get_or_init_with(&self, config: &Config, profiler: Arc<Profiler>) -> Result<Arc<Engine>> {
        self.cell
            .get_or_try_init(|| {
                let engine = Engine::build(config, profiler)?;
                self.init_count.fetch_add(1, Ordering::SeqCst);
                Ok(Arc::new(engine))
            })
            .cloned()
    }

    pub fn get(&self) -> Option<Arc<Engine>> {
        self.cell.get().cloned()
    }

    pub fn is_initialized(&self) -> bool {
        self.cell.get().is_some()
    }

    /// Number of successful builds; at most 1.
    pub fn init_count(&self) -> u64 {
        self.init_count.load(Ordering::SeqCst)
    }
}

static GLOBAL: EngineCell = EngineCell::new();

/// Process-wide engine, built on first call.
pub fn initialize(config: &Config) -> Result<Arc<Engine>> {
    GLOBAL.get_or_init(config)
}

pub fn global() -> &'static EngineCell {
    &GLOBAL
}
