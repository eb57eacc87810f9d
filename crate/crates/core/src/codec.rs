//! WAV and PNG ingress/egress.
//!
//! Audio is normalised to 16 kHz mono s16: other rates are resampled by
//! nearest neighbour and multi-channel input is averaged. Images decode to
//! RGB24 with any alpha composited over white.

use std::io::Cursor;

use crate::error::{Error, Result};
use crate::types::{AudioBuffer, ImageBuffer, CANONICAL_SAMPLE_RATE};

pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    let mut reader =
        hound::WavReader::new(Cursor::new(bytes)).map_err(|e| Error::AudioDecode(e.to_string()))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::AudioDecode(format!(
            "only 16-bit PCM is accepted, got {} bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    if spec.channels == 0 || spec.sample_rate == 0 {
        return Err(Error::AudioDecode("zero channels or sample rate".into()));
    }
    let interleaved = reader
        .samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::AudioDecode(e.to_string()))?;
    let channels = spec.channels as usize;
    let mono: Vec<i16> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| {
                let sum: i32 = frame.iter().map(|&s| s as i32).sum();
                (sum as f64 / channels as f64).round() as i16
            })
            .collect()
    };
    Ok(AudioBuffer::canonical(resample_nearest(
        &mono,
        spec.sample_rate,
        CANONICAL_SAMPLE_RATE,
    )))
}

fn resample_nearest(samples: &[i16], from: u32, to: u32) -> Vec<i16> {
    if from == to || samples.is_empty() {
        return samples.to_vec();
    }
    let n = samples.len() as u64;
    let out_len = (2 * n * to as u64 + from as u64) / (2 * from as u64);
    (0..out_len)
        .map(|i| {
            let src = (i * from as u64 / to as u64).min(n - 1);
            samples[src as usize]
        })
        .collect()
}

pub fn encode_wav(audio: &AudioBuffer) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate_hz(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::with_capacity(44 + audio.len() * 2));
    {
        let mut writer =
            hound::WavWriter::new(&mut cursor, spec).map_err(|e| Error::AudioDecode(e.to_string()))?;
        let mut w16 = writer.get_i16_writer(audio.len() as u32);
        for &s in audio.samples() {
            w16.write_sample(s);
        }
        w16.flush().map_err(|e| Error::AudioDecode(e.to_string()))?;
        writer
            .finalize()
            .map_err(|e| Error::AudioDecode(e.to_string()))?;
    }
    Ok(cursor.into_inner())
}

pub fn decode_png(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::ImageDecode(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::ImageDecode("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::ImageDecode(e.to_string()))?;
    buf.truncate(info.buffer_size());
    let (w, h) = (info.width, info.height);
    let over_white = |c: u8, a: u8| -> u8 {
        ((c as u32 * a as u32 + 255 * (255 - a as u32) + 127) / 255) as u8
    };
    let rgb: Vec<u8> = match info.color_type {
        png::ColorType::Rgb => buf,
        png::ColorType::Rgba => buf
            .chunks_exact(4)
            .flat_map(|p| {
                let a = p[3];
                [over_white(p[0], a), over_white(p[1], a), over_white(p[2], a)]
            })
            .collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => buf
            .chunks_exact(2)
            .flat_map(|p| {
                let g = over_white(p[0], p[1]);
                [g, g, g]
            })
            .collect(),
        png::ColorType::Indexed => {
            return Err(Error::ImageDecode("unexpanded palette image".into()))
        }
    };
    ImageBuffer::new(w, h, rgb)
}

pub fn encode_png(image: &ImageBuffer) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width(), image.height());
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::ImageDecode(e.to_string()))?;
        writer
            .write_image_data(image.pixels())
            .map_err(|e| Error::ImageDecode(e.to_string()))?;
    }
    Ok(out)
}
