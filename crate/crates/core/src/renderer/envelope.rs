use crate::error::{Error, Result};
use crate::types::{AudioBuffer, FrameRate};

/// Per-frame mouth openness in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSeries {
    openness: Vec<f64>,
}

impl EnvelopeSeries {
    pub fn openness(&self) -> &[f64] {
        &self.openness
    }

    pub fn len(&self) -> usize {
        self.openness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.openness.is_empty()
    }
}

/// Windowed RMS, one window of `floor(rate / fps)` samples per output frame
/// (the last may be short), normalised by the loudest window.
pub fn compute_envelope(audio: &AudioBuffer, fps: FrameRate) -> Result<EnvelopeSeries> {
    if audio.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let frames = audio.frame_count(fps) as usize;
    let window = (audio.sample_rate_hz() / fps.get()).max(1) as usize;
    let samples = audio.samples();
    let rms: Vec<f64> = (0..frames)
        .map(|i| {
            let start = (i * window).min(samples.len());
            let end = ((i + 1) * window).min(samples.len());
            let chunk = &samples[start..end];
            if chunk.is_empty() {
                return 0.0;
            }
            let energy: i64 = chunk.iter().map(|&s| s as i64 * s as i64).sum();
            (energy as f64 / chunk.len() as f64).sqrt()
        })
        .collect();
    let peak = rms.iter().copied().fold(0.0f64, f64::max);
    let openness = if peak > 0.0 {
        rms.iter().map(|r| (r / peak).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; frames]
    };
    Ok(EnvelopeSeries { openness })
}
