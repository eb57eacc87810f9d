//! Deterministic test and benchmark inputs: a procedural portrait and the
//! seven-second benchmark clip.

use crate::stages::{FixtureRegistry, ToneTable};
use crate::types::{AudioBuffer, FaceBox, ImageBuffer};

/// Exactly 7.00 s at 16 kHz.
pub const BENCH_CLIP_SAMPLES: usize = 112_000;

pub const BENCH_CLIP_TEXT: &str = "Welcome to the talking avatar benchmark. \
This sentence is synthesized and padded so the clip lasts seven seconds.";

/// Phrases whose stub-synthesised audio the stub recogniser knows.
pub const FIXTURE_PHRASES: &[&str] = &[
    "hello there",
    "make videos fast",
    "what is a digital twin",
    "tell me something new",
];

/// Edge length of the benchmark avatar.
pub const BENCH_AVATAR_EDGE: u32 = 128;

fn hash(x: u32, y: u32) -> u32 {
    let mut h = x.wrapping_mul(0x9E37_79B1) ^ y.wrapping_mul(0x85EB_CA77) ^ 0xC2B2_AE3D;
    h ^= h >> 15;
    h = h.wrapping_mul(0x2C1B_3C6D);
    h ^= h >> 12;
    h = h.wrapping_mul(0x297A_2D39);
    h ^ (h >> 15)
}

fn in_ellipse(x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> bool {
    let dx = (x - cx) / rx;
    let dy = (y - cy) / ry;
    dx * dx + dy * dy <= 1.0
}

/// Procedural head-and-shoulders portrait with per-pixel texture so that
/// template matches are unique.
pub fn synthetic_avatar(width: u32, height: u32) -> ImageBuffer {
    let (w, h) = (width as f64, height as f64);
    let mut img = ImageBuffer::filled(width, height, [0, 0, 0]).expect("edges >= 16");
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let t = fy / h;
            let mut rgb = [
                (70.0 + 60.0 * t) as i32,
                (110.0 + 50.0 * t) as i32,
                (180.0 - 40.0 * t) as i32,
            ];
            if in_ellipse(fx, fy, 0.5 * w, 1.05 * h, 0.42 * w, 0.3 * h) {
                rgb = [60, 70, 120];
            }
            if in_ellipse(fx, fy, 0.5 * w, 0.36 * h, 0.25 * w, 0.26 * h) {
                rgb = [70, 45, 30];
            }
            if in_ellipse(fx, fy, 0.5 * w, 0.42 * h, 0.2 * w, 0.24 * h) {
                let shade = ((fx - 0.5 * w) / w * 60.0) as i32;
                rgb = [225 - shade, 180 - shade, 150 - shade];
            }
            for ex in [0.42, 0.58] {
                if in_ellipse(fx, fy, ex * w, 0.38 * h, 0.035 * w, 0.02 * h) {
                    rgb = [40, 30, 30];
                }
                if in_ellipse(fx, fy, ex * w, 0.34 * h, 0.05 * w, 0.008 * h + 0.5) {
                    rgb = [60, 40, 25];
                }
            }
            if in_ellipse(fx, fy, 0.5 * w, 0.46 * h, 0.015 * w + 0.5, 0.04 * h) {
                rgb = [200, 150, 125];
            }
            if in_ellipse(fx, fy, 0.5 * w, 0.54 * h, 0.07 * w, 0.008 * h + 0.5) {
                rgb = [150, 70, 70];
            }
            let n = (hash(x, y) % 25) as i32 - 12;
            let px = rgb.map(|c| (c + n).clamp(0, 255) as u8);
            img.set_pixel(x, y, px);
        }
    }
    img
}

/// Central 40% × 40% region with its vertical centre at 40% of the height.
pub fn face_template_region(width: u32, height: u32) -> FaceBox {
    let tw = ((width as f64 * 0.4).round() as u32).max(1);
    let th = ((height as f64 * 0.4).round() as u32).max(1);
    let x = (width - tw) / 2;
    let y = ((height as f64 * 0.4 - th as f64 / 2.0).round().max(0.0) as u32).min(height - th);
    FaceBox::new(x, y, tw, th)
}

/// Stub speech for [`BENCH_CLIP_TEXT`], padded or trimmed to exactly 7 s.
pub fn bench_clip(tones: &ToneTable) -> AudioBuffer {
    tones.synthesize(BENCH_CLIP_TEXT).resized(BENCH_CLIP_SAMPLES)
}

/// Registry covering [`FIXTURE_PHRASES`] and the benchmark clip.
pub fn default_registry(tones: &ToneTable) -> FixtureRegistry {
    let mut reg = FixtureRegistry::new();
    for phrase in FIXTURE_PHRASES {
        reg.register(&tones.synthesize(phrase), *phrase);
    }
    reg.register(&bench_clip(tones), BENCH_CLIP_TEXT);
    reg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn avatar_is_deterministic() {
        assert_eq!(synthetic_avatar(64, 80), synthetic_avatar(64, 80));
    }

    #[test]
    fn template_region_geometry() {
        assert_eq!(face_template_region(100, 100), FaceBox::new(30, 20, 40, 40));
        assert_eq!(face_template_region(128, 128), FaceBox::new(38, 26, 51, 51));
        let b = face_template_region(64, 200);
        assert!(b.check_inside(64, 200).is_ok());
    }

    #[test]
    fn bench_clip_is_seven_seconds() {
        let clip = bench_clip(&ToneTable::new());
        assert_eq!(clip.len(), BENCH_CLIP_SAMPLES);
        assert_eq!(clip.duration_s(), 7.0);
    }

    #[test]
    fn registry_knows_fixtures() {
        let tones = ToneTable::new();
        let reg = default_registry(&tones);
        assert_eq!(reg.lookup(&tones.synthesize("hello there")).unwrap(), "hello there");
        assert_eq!(reg.lookup(&bench_clip(&tones)).unwrap(), BENCH_CLIP_TEXT);
    }
}
