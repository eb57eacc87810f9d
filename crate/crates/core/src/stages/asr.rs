use std::collections::HashMap;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{Backend, HttpEndpoint};
use crate::codec::encode_wav;
use crate::error::{Error, Result};
use crate::types::AudioBuffer;

/// SHA-256 over the sample rate and samples, both little-endian, as hex.
pub fn audio_digest(audio: &AudioBuffer) -> String {
    let mut h = Sha256::new();
    h.update(audio.sample_rate_hz().to_le_bytes());
    let mut bytes = Vec::with_capacity(audio.len() * 2);
    for s in audio.samples() {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    h.update(&bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Maps known clips (by digest) to their transcripts for the stub recogniser.
#[derive(Debug, Clone, Default)]
pub struct FixtureRegistry {
    by_digest: HashMap<String, String>,
}

impl FixtureRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, audio: &AudioBuffer, text: impl Into<String>) -> String {
        let digest = audio_digest(audio);
        self.by_digest.insert(digest.clone(), text.into());
        digest
    }

    pub fn lookup(&self, audio: &AudioBuffer) -> Result<&str> {
        let digest = audio_digest(audio);
        self.by_digest
            .get(&digest)
            .map(String::as_str)
            .ok_or(Error::UnknownFixture(digest))
    }

    pub fn len(&self) -> usize {
        self.by_digest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_digest.is_empty()
    }
}

#[derive(Deserialize)]
struct TextResponse {
    text: String,
}

#[derive(Debug, Clone)]
pub struct AsrAdapter {
    backend: Backend,
    fixtures: FixtureRegistry,
    model_label: String,
}

impl AsrAdapter {
    pub fn stub(fixtures: FixtureRegistry) -> Self {
        Self {
            backend: Backend::Stub,
            fixtures,
            model_label: "stub (digest fixtures)".into(),
        }
    }

    pub fn http(endpoint: HttpEndpoint) -> Self {
        Self {
            backend: Backend::Http(endpoint),
            fixtures: FixtureRegistry::new(),
            model_label: "whisper-tiny / 39M params".into(),
        }
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn model_label(&self) -> &str {
        &self.model_label
    }

    pub fn fixtures(&self) -> &FixtureRegistry {
        &self.fixtures
    }

    pub fn transcribe(&self, audio: &AudioBuffer) -> Result<String> {
        if audio.is_empty() {
            return Err(Error::precondition("cannot transcribe empty audio"));
        }
        match &self.backend {
            Backend::Stub => self.fixtures.lookup(audio).map(str::to_owned),
            Backend::Http(ep) => {
                let wav = encode_wav(audio)?;
                let resp: TextResponse =
                    ep.post_bytes_for_json("asr", "transcribe", "audio/wav", &wav)?;
                Ok(resp.text)
            }
        }
    }
}
