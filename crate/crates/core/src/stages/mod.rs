//! Speech recognition, language model and speech synthesis adapters.
//!
//! Each adapter has a deterministic local stub and an HTTP shim for a real
//! upstream service. Adapters are immutable once built and can be shared
//! across threads.

mod asr;
mod context;
mod http;
mod llm;
mod tts;

pub use asr::{audio_digest, AsrAdapter, FixtureRegistry};
pub use context::{
    build_prompt, validate_transcript, ConversationContext, Exchange, PromptMessage, Role,
    CONTEXT_DEPTH, MIN_WORDS,
};
pub use http::{HttpEndpoint, Secret};
pub use llm::{LlmAdapter, DEFAULT_BREVITY_PROMPT};
pub use tts::{ToneTable, TtsAdapter, TONE_AMPLITUDE, TONE_CELL_SAMPLES};

/// Where a stage sends its work.
#[derive(Debug, Clone)]
pub enum Backend {
    Stub,
    Http(HttpEndpoint),
}

impl Backend {
    pub fn is_stub(&self) -> bool {
        matches!(self, Backend::Stub)
    }
}
