//! Value types shared by every stage of the pipeline, plus the frame and
//! word arithmetic the rest of the crate leans on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical sample rate for every buffer that crosses a stage boundary.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

/// Smallest edge accepted for any image.
pub const MIN_IMAGE_EDGE: u32 = 16;

/// Mono signed 16-bit PCM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioBuffer {
    samples: Vec<i16>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<i16>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::precondition("sample rate must be positive"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Buffer at the canonical 16 kHz rate.
    pub fn canonical(samples: Vec<i16>) -> Self {
        Self {
            samples,
            sample_rate_hz: CANONICAL_SAMPLE_RATE,
        }
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<i16> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Frame count computed in exact integer arithmetic from the sample count.
    pub fn frame_count(&self, fps: FrameRate) -> u32 {
        frame_count_for_samples(self.samples.len(), self.sample_rate_hz, fps)
    }

    /// Pads with silence or truncates to exactly `len` samples.
    pub fn resized(mut self, len: usize) -> Self {
        self.samples.resize(len, 0);
        self
    }
}

/// Row-major RGB24 image.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width < MIN_IMAGE_EDGE || height < MIN_IMAGE_EDGE {
            return Err(Error::ImageDecode(format!(
                "image {width}x{height} is below the {MIN_IMAGE_EDGE}px minimum"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::ImageDecode(format!(
                "expected {expected} RGB bytes for {width}x{height}, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Solid-colour image.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Self::new(width, height, pixels)
    }

    /// Crate-internal constructor for buffers whose size is already known
    /// to be consistent; skips the minimum-edge check so small crops work.
    pub(crate) fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), width as usize * height as usize * 3);
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copy of the region covered by `b`.
    pub fn crop(&self, b: FaceBox) -> Result<ImageBuffer> {
        b.check_inside(self.width, self.height)?;
        let row_bytes = b.w as usize * 3;
        let mut out = Vec::with_capacity(row_bytes * b.h as usize);
        for y in b.y..b.y + b.h {
            let start = (y as usize * self.width as usize + b.x as usize) * 3;
            out.extend_from_slice(&self.pixels[start..start + row_bytes]);
        }
        Ok(ImageBuffer::from_raw(b.w, b.h, out))
    }

    /// Nearest-neighbour resample to `w`×`h`.
    pub fn resize_nearest(&self, w: u32, h: u32) -> ImageBuffer {
        if w == self.width && h == self.height {
            return self.clone();
        }
        let src_w = self.width as usize;
        let xs: Vec<usize> = (0..w as usize)
            .map(|x| x * src_w / w as usize)
            .collect();
        let mut out = Vec::with_capacity(w as usize * h as usize * 3);
        for y in 0..h as usize {
            let sy = y * self.height as usize / h as usize;
            let row = &self.pixels[sy * src_w * 3..(sy + 1) * src_w * 3];
            for &sx in &xs {
                out.extend_from_slice(&row[sx * 3..sx * 3 + 3]);
            }
        }
        ImageBuffer::from_raw(w, h, out)
    }

    /// Integer BT.601 luma plane.
    pub fn luma(&self) -> Vec<u8> {
        self.pixels
            .chunks_exact(3)
            .map(|p| ((77 * p[0] as u32 + 150 * p[1] as u32 + 29 * p[2] as u32 + 128) >> 8) as u8)
            .collect()
    }
}

/// Axis-aligned face region in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl FaceBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn check_inside(&self, frame_w: u32, frame_h: u32) -> Result<()> {
        let fits = self.w > 0
            && self.h > 0
            && self.x as u64 + self.w as u64 <= frame_w as u64
            && self.y as u64 + self.h as u64 <= frame_h as u64;
        if fits {
            Ok(())
        } else {
            Err(Error::BoxOutOfBounds {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
                frame_w,
                frame_h,
            })
        }
    }
}

/// Output frame rate, 16..=60.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct FrameRate(u16);

impl FrameRate {
    pub const MIN: u32 = 16;
    pub const MAX: u32 = 60;

    pub fn new(fps: u32) -> Result<Self> {
        if (Self::MIN..=Self::MAX).contains(&fps) {
            Ok(Self(fps as u16))
        } else {
            Err(Error::InvalidFrameRate(fps))
        }
    }

    pub fn get(self) -> u32 {
        self.0 as u32
    }
}

impl TryFrom<u32> for FrameRate {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FrameRate> for u32 {
    fn from(f: FrameRate) -> u32 {
        f.get()
    }
}

impl std::fmt::Display for FrameRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Recognised or typed text together with its whitespace token count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    text: String,
    word_count: usize,
}

impl Transcript {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let word_count = word_count(&text);
        Self { text, word_count }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }
}

/// Number of video frames for a clip: `round(duration_s * fps)` with
/// round-half-up, never less than one for a non-empty clip.
pub fn frame_count(duration_s: f64, fps: FrameRate) -> u32 {
    if !(duration_s > 0.0) {
        return 0;
    }
    // The epsilon absorbs representation error at exact half-frame points
    // (0.06 * 25 is 1.4999999999999998 in binary).
    let n = (duration_s * fps.get() as f64 + 0.5 + 1e-9).floor();
    (n as u32).max(1)
}

/// Exact form of [`frame_count`] for `samples` at `rate` Hz.
pub fn frame_count_for_samples(samples: usize, rate: u32, fps: FrameRate) -> u32 {
    if samples == 0 {
        return 0;
    }
    let num = 2 * samples as u64 * fps.get() as u64 + rate as u64;
    let n = num / (2 * rate as u64);
    (n as u32).max(1)
}

/// Number of maximal runs of non-whitespace characters.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}
