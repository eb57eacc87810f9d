use std::f64::consts::TAU;
use std::sync::Arc;

use serde::Serialize;

use super::{Backend, HttpEndpoint};
use crate::codec::decode_wav;
use crate::error::{Error, Result};
use crate::types::{AudioBuffer, CANONICAL_SAMPLE_RATE};

/// 60 ms at 16 kHz.
pub const TONE_CELL_SAMPLES: usize = 960;

/// 0.4 of full scale.
pub const TONE_AMPLITUDE: f64 = 0.4 * i16::MAX as f64;

const TONE_COUNT: usize = 64;

/// Precomputed 60 ms sine cells, one per `codepoint mod 64` class.
#[derive(Debug, Clone)]
pub struct ToneTable {
    cells: Vec<[i16; TONE_CELL_SAMPLES]>,
}

impl Default for ToneTable {
    fn default() -> Self {
        Self::new()
    }
}

impl ToneTable {
    pub fn new() -> Self {
        let cells = (0..TONE_COUNT)
            .map(|class| {
                let freq = 200.0 + class as f64 * 10.0;
                let mut cell = [0i16; TONE_CELL_SAMPLES];
                for (n, s) in cell.iter_mut().enumerate() {
                    let t = n as f64 / CANONICAL_SAMPLE_RATE as f64;
                    *s = (TONE_AMPLITUDE * (TAU * freq * t).sin()).round() as i16;
                }
                cell
            })
            .collect();
        Self { cells }
    }

    /// Samples for one character; silence for whitespace.
    pub fn cell(&self, c: char) -> &[i16] {
        const SILENCE: [i16; TONE_CELL_SAMPLES] = [0; TONE_CELL_SAMPLES];
        if c.is_whitespace() {
            &SILENCE
        } else {
            &self.cells[(c as u32 % TONE_COUNT as u32) as usize]
        }
    }

    pub fn synthesize(&self, text: &str) -> AudioBuffer {
        let mut samples = Vec::with_capacity(text.chars().count() * TONE_CELL_SAMPLES);
        for c in text.chars() {
            samples.extend_from_slice(self.cell(c));
        }
        AudioBuffer::canonical(samples)
    }
}

#[derive(Serialize)]
struct SynthesizeRequest<'a> {
    text: &'a str,
}

#[derive(Debug, Clone)]
pub struct TtsAdapter {
    backend: Backend,
    tones: Arc<ToneTable>,
    model_label: String,
}

impl TtsAdapter {
    pub fn stub(tones: Arc<ToneTable>) -> Self {
        Self {
            backend: Backend::Stub,
            tones,
            model_label: "stub (tone cells)".into(),
        }
    }

    pub fn http(endpoint: HttpEndpoint) -> Self {
        Self {
            backend: Backend::Http(endpoint),
            tones: Arc::new(ToneTable::new()),
            model_label: "neural TTS / 140 languages".into(),
        }
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn model_label(&self) -> &str {
        &self.model_label
    }

    pub fn synthesize(&self, text: &str) -> Result<AudioBuffer> {
        if text.is_empty() {
            return Err(Error::EmptyText);
        }
        match &self.backend {
            Backend::Stub => Ok(self.tones.synthesize(text)),
            Backend::Http(ep) => {
                let wav = ep.post_json_for_bytes("tts", "synthesize", &SynthesizeRequest { text })?;
                decode_wav(&wav).map_err(|e| Error::upstream("tts", e))
            }
        }
    }
}
