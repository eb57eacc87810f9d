//! Engine and service configuration: a TOML file with `UTALK_*`
//! environment overrides.
//!
//! ```toml
//! [stages]
//! asr_backend = "stub"          # or "http"
//! asr_endpoint = "http://localhost:9000"
//! llm_backend = "stub"
//! tts_backend = "stub"
//! brevity_prompt = "Answer concisely in at most three sentences."
//!
//! [render]
//! fps = 20
//! progress_callbacks = false
//! resize_policy = "fast256"     # or "full512"
//! detector = "light_tracking"   # or "heavy_exhaustive"
//! edge_blur = false
//! persist_intermediates = false
//! writer = "streaming"          # or "buffered"
//!
//! [service]
//! listen = "127.0.0.1:8080"
//! video_dir = "videos"
//! cors_origin = "*"
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renderer::{Detector, RenderConfig, ResizePolicy, WriterKind};
use crate::stages::{HttpEndpoint, Secret, DEFAULT_BREVITY_PROMPT};
use crate::types::FrameRate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Stub,
    Http,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stub" => Ok(Self::Stub),
            "http" => Ok(Self::Http),
            other => Err(Error::Config(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageConfig {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Stub,
            endpoint: None,
        }
    }
}

impl StageConfig {
    /// Endpoint plus credential for an http stage, or `None` for a stub.
    pub fn http_endpoint(&self, stage: &str, credential: Option<Secret>) -> Result<Option<HttpEndpoint>> {
        match self.backend {
            BackendKind::Stub => Ok(None),
            BackendKind::Http => {
                let url = self.endpoint.as_deref().unwrap_or("");
                if url.trim().is_empty() {
                    return Err(Error::Config(format!(
                        "{stage} backend is http but no endpoint is configured"
                    )));
                }
                HttpEndpoint::new(url, credential).map(Some)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub asr: StageConfig,
    pub llm: StageConfig,
    pub tts: StageConfig,
    pub brevity_prompt: String,
    pub render: RenderConfig,
    pub listen: String,
    pub video_dir: PathBuf,
    pub cors_origin: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            asr: StageConfig::default(),
            llm: StageConfig::default(),
            tts: StageConfig::default(),
            brevity_prompt: DEFAULT_BREVITY_PROMPT.into(),
            render: RenderConfig::default(),
            listen: "127.0.0.1:8080".into(),
            video_dir: PathBuf::from("videos"),
            cors_origin: "*".into(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    stages: RawStages,
    #[serde(default)]
    render: RawRender,
    #[serde(default)]
    service: RawService,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStages {
    asr_backend: Option<BackendKind>,
    asr_endpoint: Option<String>,
    llm_backend: Option<BackendKind>,
    llm_endpoint: Option<String>,
    tts_backend: Option<BackendKind>,
    tts_endpoint: Option<String>,
    brevity_prompt: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRender {
    fps: Option<u32>,
    progress_callbacks: Option<bool>,
    resize_policy: Option<ResizePolicy>,
    detector: Option<Detector>,
    edge_blur: Option<bool>,
    persist_intermediates: Option<bool>,
    writer: Option<WriterKind>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawService {
    listen: Option<String>,
    video_dir: Option<PathBuf>,
    cors_origin: Option<String>,
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(key: &str, v: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(v.trim().to_ascii_lowercase()))
        .map_err(|_| Error::Config(format!("{key}: unrecognised value {v:?}")))
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut c = Config::default();
        let s = raw.stages;
        if let Some(b) = s.asr_backend {
            c.asr.backend = b;
        }
        c.asr.endpoint = s.asr_endpoint.or(c.asr.endpoint);
        if let Some(b) = s.llm_backend {
            c.llm.backend = b;
        }
        c.llm.endpoint = s.llm_endpoint.or(c.llm.endpoint);
        if let Some(b) = s.tts_backend {
            c.tts.backend = b;
        }
        c.tts.endpoint = s.tts_endpoint.or(c.tts.endpoint);
        if let Some(p) = s.brevity_prompt {
            c.brevity_prompt = p;
        }
        let r = raw.render;
        if let Some(fps) = r.fps {
            c.render.fps = FrameRate::new(fps).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(v) = r.progress_callbacks {
            c.render.progress_callbacks = v;
        }
        if let Some(v) = r.resize_policy {
            c.render.resize_policy = v;
        }
        if let Some(v) = r.detector {
            c.render.detector = v;
        }
        if let Some(v) = r.edge_blur {
            c.render.edge_blur = v;
        }
        if let Some(v) = r.persist_intermediates {
            c.render.persist_intermediates = v;
        }
        if let Some(v) = r.writer {
            c.render.writer = v;
        }
        let v = raw.service;
        if let Some(l) = v.listen {
            c.listen = l;
        }
        if let Some(d) = v.video_dir {
            c.video_dir = d;
        }
        if let Some(o) = v.cors_origin {
            c.cors_origin = o;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Applies `UTALK_*` overrides read through `lookup`.
    pub fn apply_env_from(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        let get = |k: &str| lookup(k).filter(|v| !v.is_empty());
        for (prefix, stage) in [
            ("UTALK_ASR", &mut self.asr),
            ("UTALK_LLM", &mut self.llm),
            ("UTALK_TTS", &mut self.tts),
        ] {
            if let Some(v) = get(&format!("{prefix}_BACKEND")) {
                stage.backend = v.parse()?;
            }
            if let Some(v) = get(&format!("{prefix}_ENDPOINT")) {
                stage.endpoint = Some(v);
            }
        }
        if let Some(v) = get("UTALK_BREVITY_PROMPT") {
            self.brevity_prompt = v;
        }
        if let Some(v) = get("UTALK_FPS") {
            let n: u32 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("UTALK_FPS: not an integer: {v:?}")))?;
            self.render.fps = FrameRate::new(n).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(v) = get("UTALK_PROGRESS_CALLBACKS") {
            self.render.progress_callbacks = parse_bool("UTALK_PROGRESS_CALLBACKS", &v)?;
        }
        if let Some(v) = get("UTALK_RESIZE_POLICY") {
            self.render.resize_policy = parse_enum("UTALK_RESIZE_POLICY", &v)?;
        }
        if let Some(v) = get("UTALK_DETECTOR") {
            self.render.detector = parse_enum("UTALK_DETECTOR", &v)?;
        }
        if let Some(v) = get("UTALK_EDGE_BLUR") {
            self.render.edge_blur = parse_bool("UTALK_EDGE_BLUR", &v)?;
        }
        if let Some(v) = get("UTALK_PERSIST_INTERMEDIATES") {
            self.render.persist_intermediates = parse_bool("UTALK_PERSIST_INTERMEDIATES", &v)?;
        }
        if let Some(v) = get("UTALK_WRITER") {
            self.render.writer = parse_enum("UTALK_WRITER", &v)?;
        }
        if let Some(v) = get("UTALK_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = get("UTALK_VIDEO_DIR") {
            self.video_dir = PathBuf::from(v);
        }
        if let Some(v) = get("UTALK_CORS_ORIGIN") {
            self.cors_origin = v;
        }
        Ok(())
    }

    pub fn apply_env(&mut self) -> Result<()> {
        self.apply_env_from(|k| std::env::var(k).ok())
    }

    /// Checks cross-field requirements without touching the network.
    pub fn validate(&self) -> Result<()> {
        self.asr.http_endpoint("asr", None)?;
        self.llm.http_endpoint("llm", None)?;
        self.tts.http_endpoint("tts", None)?;
        if self.brevity_prompt.trim().is_empty() {
            return Err(Error::Config("brevity_prompt must be non-empty".into()));
        }
        Ok(())
    }
}
