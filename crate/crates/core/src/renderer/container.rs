//! UVID: uncompressed little-endian container holding RGB24 frames and
//! s16le mono audio.
//!
//! ```text
//! "UVID" | version u16 | width u32 | height u32 | fps u16 | frame_count u32
//!        | audio_sample_rate u32 | audio_sample_count u64
//!        | frame_count * width * height * 3 bytes | audio_sample_count * 2 bytes
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AudioBuffer, ImageBuffer};

pub const MAGIC: &[u8; 4] = b"UVID";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UvidHeader {
    pub width: u32,
    pub height: u32,
    pub fps: u16,
    pub frame_count: u32,
    pub audio_sample_rate: u32,
    pub audio_sample_count: u64,
}

impl UvidHeader {
    pub fn frame_bytes(&self) -> usize {
        self.width as usize * self.height as usize * 3
    }

    pub fn total_len(&self) -> usize {
        HEADER_LEN
            + self.frame_count as usize * self.frame_bytes()
            + self.audio_sample_count as usize * 2
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(MAGIC);
        b[4..6].copy_from_slice(&VERSION.to_le_bytes());
        b[6..10].copy_from_slice(&self.width.to_le_bytes());
        b[10..14].copy_from_slice(&self.height.to_le_bytes());
        b[14..16].copy_from_slice(&self.fps.to_le_bytes());
        b[16..20].copy_from_slice(&self.frame_count.to_le_bytes());
        b[20..24].copy_from_slice(&self.audio_sample_rate.to_le_bytes());
        b[24..32].copy_from_slice(&self.audio_sample_count.to_le_bytes());
        b
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "{} bytes is shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = u16_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        Ok(Self {
            width: u32_at(6),
            height: u32_at(10),
            fps: u16_at(14),
            frame_count: u32_at(16),
            audio_sample_rate: u32_at(20),
            audio_sample_count: u64::from_le_bytes(bytes[24..32].try_into().unwrap()),
        })
    }

    fn check_frame(&self, frame: &ImageBuffer) -> Result<()> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::precondition(format!(
                "frame is {}x{}, header says {}x{}",
                frame.width(),
                frame.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }

    fn check_audio(&self, audio: &AudioBuffer) -> Result<()> {
        if audio.len() as u64 != self.audio_sample_count
            || audio.sample_rate_hz() != self.audio_sample_rate
        {
            return Err(Error::precondition(format!(
                "audio has {} samples at {} Hz, header says {} at {} Hz",
                audio.len(),
                audio.sample_rate_hz(),
                self.audio_sample_count,
                self.audio_sample_rate
            )));
        }
        Ok(())
    }
}

fn audio_bytes(audio: &AudioBuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(audio.len() * 2);
    for s in audio.samples() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

/// Holds every frame in memory and serialises the container in one pass.
pub fn write_buffered(
    frames: &[ImageBuffer],
    audio: &AudioBuffer,
    header: &UvidHeader,
) -> Result<Vec<u8>> {
    if frames.len() != header.frame_count as usize {
        return Err(Error::precondition(format!(
            "{} frames supplied, header says {}",
            frames.len(),
            header.frame_count
        )));
    }
    for f in frames {
        header.check_frame(f)?;
    }
    header.check_audio(audio)?;
    let mut out = Vec::new();
    out.write_all(&header.to_bytes())?;
    for f in frames {
        out.write_all(f.pixels())?;
    }
    out.write_all(&audio_bytes(audio))?;
    Ok(out)
}

/// Writes the header up front and each frame as soon as it is produced.
pub struct StreamingWriter<W: Write> {
    sink: W,
    header: UvidHeader,
    written: u32,
}

impl<W: Write> StreamingWriter<W> {
    pub fn new(mut sink: W, header: UvidHeader) -> Result<Self> {
        sink.write_all(&header.to_bytes())?;
        Ok(Self {
            sink,
            header,
            written: 0,
        })
    }

    pub fn push_frame(&mut self, frame: &ImageBuffer) -> Result<()> {
        if self.written == self.header.frame_count {
            return Err(Error::precondition(format!(
                "header declares {} frames; refusing frame {}",
                self.header.frame_count,
                self.written + 1
            )));
        }
        self.header.check_frame(frame)?;
        self.sink.write_all(frame.pixels())?;
        self.written += 1;
        Ok(())
    }

    pub fn frames_written(&self) -> u32 {
        self.written
    }

    /// Appends the audio payload and hands back the sink.
    pub fn finish(mut self, audio: &AudioBuffer) -> Result<W> {
        if self.written != self.header.frame_count {
            return Err(Error::precondition(format!(
                "{} frames written, header says {}",
                self.written, self.header.frame_count
            )));
        }
        self.header.check_audio(audio)?;
        self.sink.write_all(&audio_bytes(audio))?;
        self.sink.flush()?;
        Ok(self.sink)
    }
}

/// Streams `frames` into an in-memory container.
pub fn write_streaming<'a>(
    frames: impl IntoIterator<Item = &'a ImageBuffer>,
    audio: &AudioBuffer,
    header: &UvidHeader,
) -> Result<Vec<u8>> {
    let mut w = StreamingWriter::new(Vec::with_capacity(header.total_len()), *header)?;
    for f in frames {
        w.push_frame(f)?;
    }
    w.finish(audio)
}

/// A complete, validated UVID byte stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoFile {
    header: UvidHeader,
    bytes: Vec<u8>,
}

impl VideoFile {
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        let header = UvidHeader::parse(&bytes)?;
        if bytes.len() != header.total_len() {
            return Err(Error::Format(format!(
                "file is {} bytes, header implies {}",
                bytes.len(),
                header.total_len()
            )));
        }
        Ok(Self { header, bytes })
    }

    pub fn header(&self) -> &UvidHeader {
        &self.header
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn frame_count(&self) -> u32 {
        self.header.frame_count
    }

    pub fn frame_pixels(&self, index: u32) -> Option<&[u8]> {
        if index >= self.header.frame_count {
            return None;
        }
        let fb = self.header.frame_bytes();
        let start = HEADER_LEN + index as usize * fb;
        Some(&self.bytes[start..start + fb])
    }

    pub fn frame(&self, index: u32) -> Option<ImageBuffer> {
        self.frame_pixels(index).map(|p| {
            ImageBuffer::from_raw(self.header.width, self.header.height, p.to_vec())
        })
    }

    pub fn audio(&self) -> AudioBuffer {
        let start = HEADER_LEN + self.header.frame_count as usize * self.header.frame_bytes();
        let samples = self.bytes[start..]
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]))
            .collect();
        AudioBuffer::new(samples, self.header.audio_sample_rate.max(1))
            .expect("rate clamped to a positive value")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(frames: u32, w: u32, h: u32, audio: &AudioBuffer) -> UvidHeader {
        UvidHeader {
            width: w,
            height: h,
            fps: 25,
            frame_count: frames,
            audio_sample_rate: audio.sample_rate_hz(),
            audio_sample_count: audio.len() as u64,
        }
    }

    #[test]
    fn header_layout_is_exact() {
        let h = UvidHeader {
            width: 0x0102_0304,
            height: 2,
            fps: 25,
            frame_count: 175,
            audio_sample_rate: 16_000,
            audio_sample_count: 112_000,
        };
        let b = h.to_bytes();
        assert_eq!(&b[0..4], b"UVID");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(&b[6..10], &[4, 3, 2, 1]);
        assert_eq!(&b[14..16], &[25, 0]);
        assert_eq!(&b[16..20], &175u32.to_le_bytes());
        assert_eq!(&b[24..32], &112_000u64.to_le_bytes());
        assert_eq!(UvidHeader::parse(&b).unwrap(), h);
    }

    #[test]
    fn zero_frames_header_only_and_identical() {
        let audio = AudioBuffer::canonical(vec![]);
        let h = header(0, 16, 16, &audio);
        let a = write_buffered(&[], &audio, &h).unwrap();
        let b = write_streaming([], &audio, &h).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), HEADER_LEN);
    }

    #[test]
    fn frame_count_mismatch_rejected() {
        let audio = AudioBuffer::canonical(vec![1, 2]);
        let f = ImageBuffer::filled(16, 16, [1, 2, 3]).unwrap();
        let h = header(2, 16, 16, &audio);
        assert!(matches!(
            write_buffered(&[f.clone()], &audio, &h),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            write_streaming([&f], &audio, &h),
            Err(Error::Precondition(_))
        ));
        let h1 = header(1, 16, 16, &audio);
        assert!(matches!(
            write_streaming([&f, &f], &audio, &h1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn bad_magic_and_truncation() {
        assert!(matches!(VideoFile::from_bytes(b"NOPE".to_vec()), Err(Error::Format(_))));
        let audio = AudioBuffer::canonical(vec![7; 3]);
        let f = ImageBuffer::filled(16, 16, [9, 9, 9]).unwrap();
        let h = header(1, 16, 16, &audio);
        let mut bytes = write_buffered(&[f], &audio, &h).unwrap();
        bytes[0] = b'X';
        assert!(VideoFile::from_bytes(bytes.clone()).is_err());
        bytes[0] = b'U';
        bytes.pop();
        assert!(VideoFile::from_bytes(bytes).is_err());
    }

    proptest! {
        #[test]
        fn writers_agree_and_parse_back(
            n in 0u32..5,
            w in 16u32..24,
            h in 16u32..20,
            seed in any::<u8>(),
            samples in proptest::collection::vec(any::<i16>(), 0..64),
        ) {
            let audio = AudioBuffer::canonical(samples);
            let frames: Vec<ImageBuffer> = (0..n)
                .map(|i| ImageBuffer::filled(w, h, [seed, i as u8, seed.wrapping_add(i as u8)]).unwrap())
                .collect();
            let hd = header(n, w, h, &audio);
            let a = write_buffered(&frames, &audio, &hd).unwrap();
            let b = write_streaming(&frames, &audio, &hd).unwrap();
            prop_assert_eq!(&a, &b);
            let v = VideoFile::from_bytes(a).unwrap();
            prop_assert_eq!(v.header(), &hd);
            for (i, f) in frames.iter().enumerate() {
                prop_assert_eq!(v.frame(i as u32).unwrap(), f.clone());
            }
            prop_assert_eq!(v.audio(), audio);
        }
    }
}
