//! Procedural talking-head renderer.
//!
//! Audio drives a per-frame mouth-openness envelope; each frame renders the
//! face crop, re-detects the face in the base frame, composites the crop
//! back and hands the frame to the container writer. Every runtime
//! optimisation is a [`RenderConfig`] toggle. Only `fps` and
//! `resize_policy` may change the output bytes.

mod container;
mod detect;
mod envelope;
mod face;
mod progress;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use container::{
    write_buffered, write_streaming, StreamingWriter, UvidHeader, VideoFile, HEADER_LEN, MAGIC,
    VERSION,
};
pub use detect::{
    detect_face, detect_prepared, Detector, PreparedTemplate, MIN_CORRELATION, TRACKING_RADIUS,
};
pub use envelope::{compute_envelope, EnvelopeSeries};
pub use face::{
    composite_face, gaussian_blur_5x5, mouth_ellipse, render_face_crop, ResizePolicy, MOUTH_RGB,
};
pub use progress::{Progress, ProgressBar};

use crate::codec::encode_png;
use crate::error::{Error, Result};
use crate::profiler::Profiler;
use crate::types::{AudioBuffer, FaceBox, FrameRate, ImageBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WriterKind {
    /// Collect every frame, then serialise once at the end.
    Buffered,
    /// Serialise each frame as soon as it is composited.
    Streaming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RenderConfig {
    pub fps: FrameRate,
    pub progress_callbacks: bool,
    pub resize_policy: ResizePolicy,
    pub detector: Detector,
    pub edge_blur: bool,
    pub persist_intermediates: bool,
    pub writer: WriterKind,
}

impl Default for RenderConfig {
    /// Every optimisation on, 20 fps.
    fn default() -> Self {
        Self {
            fps: FrameRate::new(20).expect("in range"),
            progress_callbacks: false,
            resize_policy: ResizePolicy::Fast256,
            detector: Detector::LightTracking,
            edge_blur: false,
            persist_intermediates: false,
            writer: WriterKind::Streaming,
        }
    }
}

impl RenderConfig {
    /// Every optimisation off, 25 fps.
    pub fn baseline() -> Self {
        Self {
            fps: FrameRate::new(25).expect("in range"),
            progress_callbacks: true,
            resize_policy: ResizePolicy::Full512,
            detector: Detector::HeavyExhaustive,
            edge_blur: true,
            persist_intermediates: true,
            writer: WriterKind::Buffered,
        }
    }

    pub fn with_fps(mut self, fps: FrameRate) -> Self {
        self.fps = fps;
        self
    }
}

enum FrameSink {
    Buffered(Vec<ImageBuffer>),
    Streaming(StreamingWriter<Vec<u8>>),
}

fn persist_frame(dir: &Path, index: usize, frame: &ImageBuffer) -> Result<()> {
    let png = encode_png(frame).map_err(|e| Error::WriteFailure(std::io::Error::other(e)))?;
    std::fs::write(dir.join(format!("frame_{index:06}.png")), png)?;
    Ok(())
}

/// Renders `audio` spoken by `avatar` into a UVID container.
pub fn render_video(
    avatar: &ImageBuffer,
    face_box: FaceBox,
    audio: &AudioBuffer,
    cfg: &RenderConfig,
    profiler: &Profiler,
    mut progress: Option<&mut dyn FnMut(Progress)>,
) -> Result<VideoFile> {
    let _whole = profiler.span("render_video");
    if audio.is_empty() {
        return Err(Error::EmptyAudio);
    }
    face_box.check_inside(avatar.width(), avatar.height())?;
    let envelope = profiler.time("compute_envelope", || compute_envelope(audio, cfg.fps))?;
    let avatar_face = avatar.crop(face_box)?;
    let template = PreparedTemplate::new(&avatar_face);

    let header = UvidHeader {
        width: avatar.width(),
        height: avatar.height(),
        fps: cfg.fps.get() as u16,
        frame_count: envelope.len() as u32,
        audio_sample_rate: audio.sample_rate_hz(),
        audio_sample_count: audio.len() as u64,
    };
    let scratch = if cfg.persist_intermediates {
        Some(tempfile::Builder::new().prefix("utalk-frames-").tempdir()?)
    } else {
        None
    };
    let mut sink = match cfg.writer {
        WriterKind::Buffered => FrameSink::Buffered(Vec::new()),
        WriterKind::Streaming => FrameSink::Streaming(StreamingWriter::new(
            Vec::with_capacity(header.total_len()),
            header,
        )?),
    };

    let mut prev: Option<FaceBox> = None;
    for (i, &openness) in envelope.openness().iter().enumerate() {
        let crop = profiler.time("render_face_crop", || {
            render_face_crop(&avatar_face, openness, cfg.resize_policy)
        })?;
        let found = profiler.time("detect_face", || {
            detect_prepared(avatar, &template, cfg.detector, prev)
        })?;
        prev = Some(found);
        let frame = profiler.time("composite_face", || {
            composite_face(avatar, &crop, found, cfg.edge_blur, profiler)
        })?;
        if let Some(dir) = &scratch {
            profiler.time("persist_intermediate", || persist_frame(dir.path(), i, &frame))?;
        }
        profiler.time("write_frame", || match &mut sink {
            FrameSink::Buffered(frames) => {
                frames.push(frame);
                Ok(())
            }
            FrameSink::Streaming(w) => w.push_frame(&frame),
        })?;
        if cfg.progress_callbacks {
            if let Some(cb) = progress.as_mut() {
                cb(Progress {
                    frame: i as u32 + 1,
                    total: header.frame_count,
                });
            }
        }
    }

    let bytes = profiler.time("finalize_container", || match sink {
        FrameSink::Buffered(frames) => write_buffered(&frames, audio, &header),
        FrameSink::Streaming(w) => w.finish(audio),
    })?;
    if let Some(dir) = scratch {
        dir.close()?;
    }
    VideoFile::from_bytes(bytes)
}
