use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Fewer than two words survived transcription or were typed.
    #[error("input has {words} word(s); at least two are required")]
    SilentInput { words: usize },

    #[error("no transcript fixture registered for audio digest {0}")]
    UnknownFixture(String),

    #[error("upstream {stage} service failed: {message}")]
    Upstream { stage: &'static str, message: String },

    #[error("text to synthesize is empty")]
    EmptyText,

    #[error("audio buffer is empty")]
    EmptyAudio,

    #[error("no face found (best correlation {best:.3})")]
    NoFace { best: f64 },

    #[error("face box {x},{y} {w}x{h} does not fit in a {frame_w}x{frame_h} frame")]
    BoxOutOfBounds {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        frame_w: u32,
        frame_h: u32,
    },

    #[error("write failed: {0}")]
    WriteFailure(#[from] std::io::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("frame rate {0} outside 16..=60")]
    InvalidFrameRate(u32),

    #[error("image decode failed: {0}")]
    ImageDecode(String),

    #[error("audio decode failed: {0}")]
    AudioDecode(String),

    #[error("malformed video container: {0}")]
    Format(String),

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("baseline runtime must be positive, got {0}")]
    NonPositiveBaseline(f64),

    #[error("busy: {0}")]
    Busy(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn upstream(stage: &'static str, msg: impl std::fmt::Display) -> Self {
        Error::Upstream {
            stage,
            message: msg.to_string(),
        }
    }

    /// Stable machine-readable code used by the HTTP error envelope.
    pub fn code(&self) -> &'static str {
        match self {
            Error::SilentInput { .. } => "silent_input",
            Error::UnknownFixture(_) => "unknown_fixture",
            Error::Upstream { .. } => "upstream_error",
            Error::EmptyText => "empty_text",
            Error::EmptyAudio => "empty_audio",
            Error::NoFace { .. } => "no_face",
            Error::BoxOutOfBounds { .. } => "box_out_of_bounds",
            Error::WriteFailure(_) => "write_failure",
            Error::Config(_) => "config_error",
            Error::InvalidFrameRate(_) => "invalid_fps",
            Error::ImageDecode(_) => "image_decode",
            Error::AudioDecode(_) => "audio_decode",
            Error::Format(_) => "format_error",
            Error::TooFewSamples(_) => "too_few_samples",
            Error::NonPositiveBaseline(_) => "non_positive_baseline",
            Error::Busy(_) => "busy",
            Error::Precondition(_) => "precondition",
        }
    }
}
