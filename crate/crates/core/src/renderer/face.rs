use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiler::Profiler;
use crate::types::{FaceBox, ImageBuffer};

pub const MOUTH_RGB: [u8; 3] = [70, 20, 30];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizePolicy {
    Full512,
    Fast256,
}

impl ResizePolicy {
    pub fn edge(self) -> u32 {
        match self {
            ResizePolicy::Full512 => 512,
            ResizePolicy::Fast256 => 256,
        }
    }
}

/// Mouth ellipse geometry on an `edge`×`edge` crop: centre, semi-axes.
pub fn mouth_ellipse(edge: u32, openness: f64) -> (f64, f64, f64, f64) {
    let s = edge as f64;
    let height = 0.02 * s + openness * 0.16 * s;
    (0.5 * s, 0.72 * s, 0.15 * s, height / 2.0)
}

/// Scales the face to the policy resolution and draws the mouth.
pub fn render_face_crop(
    avatar_face: &ImageBuffer,
    openness: f64,
    policy: ResizePolicy,
) -> Result<ImageBuffer> {
    if !(0.0..=1.0).contains(&openness) {
        return Err(Error::precondition(format!("openness {openness} outside [0, 1]")));
    }
    let edge = policy.edge();
    let mut crop = avatar_face.resize_nearest(edge, edge);
    let (cx, cy, rx, ry) = mouth_ellipse(edge, openness);
    let y0 = (cy - ry - 1.0).floor().max(0.0) as u32;
    let y1 = ((cy + ry + 1.0).ceil() as u32).min(edge);
    let x0 = (cx - rx - 1.0).floor().max(0.0) as u32;
    let x1 = ((cx + rx + 1.0).ceil() as u32).min(edge);
    for y in y0..y1 {
        let dy = (y as f64 + 0.5 - cy) / ry;
        for x in x0..x1 {
            let dx = (x as f64 + 0.5 - cx) / rx;
            if dx * dx + dy * dy <= 1.0 {
                crop.set_pixel(x, y, MOUTH_RGB);
            }
        }
    }
    Ok(crop)
}

/// Binomial 5-tap row; its outer product is a 5×5 Gaussian with σ = 1 whose
/// integer weights sum to 256.
const TAPS: [u32; 5] = [1, 4, 6, 4, 1];

/// One 5×5 Gaussian pass over a single-channel plane, zero outside.
pub fn gaussian_blur_5x5(plane: &[u8], width: usize, height: usize) -> Vec<u8> {
    debug_assert_eq!(plane.len(), width * height);
    let mut out = vec![0u8; plane.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0u32;
            for (ky, wy) in TAPS.iter().enumerate() {
                let sy = y as isize + ky as isize - 2;
                if sy < 0 || sy >= height as isize {
                    continue;
                }
                let row = &plane[sy as usize * width..(sy as usize + 1) * width];
                for (kx, wx) in TAPS.iter().enumerate() {
                    let sx = x as isize + kx as isize - 2;
                    if sx < 0 || sx >= width as isize {
                        continue;
                    }
                    acc += wy * wx * row[sx as usize] as u32;
                }
            }
            out[y * width + x] = ((acc + 128) >> 8) as u8;
        }
    }
    out
}

/// Pastes `crop` (resized to the box) into a copy of `frame`.
///
/// With `edge_blur` the paste mask is softened by two Gaussian passes and
/// used as per-pixel alpha.
pub fn composite_face(
    frame: &ImageBuffer,
    crop: &ImageBuffer,
    face_box: FaceBox,
    edge_blur: bool,
    profiler: &Profiler,
) -> Result<ImageBuffer> {
    face_box.check_inside(frame.width(), frame.height())?;
    let patch = crop.resize_nearest(face_box.w, face_box.h);
    let mut out = frame.clone();
    let fw = frame.width() as usize;
    let (bw, bh) = (face_box.w as usize, face_box.h as usize);
    let row_bytes = bw * 3;
    if !edge_blur {
        let dst = out.pixels_mut();
        for r in 0..bh {
            let d = ((face_box.y as usize + r) * fw + face_box.x as usize) * 3;
            dst[d..d + row_bytes].copy_from_slice(&patch.pixels()[r * row_bytes..][..row_bytes]);
        }
        return Ok(out);
    }
    let mask = vec![255u8; bw * bh];
    let mask = profiler.time("gaussian_blur", || gaussian_blur_5x5(&mask, bw, bh));
    let alpha = profiler.time("gaussian_blur", || gaussian_blur_5x5(&mask, bw, bh));
    let dst = out.pixels_mut();
    for r in 0..bh {
        let d = ((face_box.y as usize + r) * fw + face_box.x as usize) * 3;
        let src = &patch.pixels()[r * row_bytes..][..row_bytes];
        let a_row = &alpha[r * bw..][..bw];
        for (c, (&s, d)) in src.iter().zip(&mut dst[d..d + row_bytes]).enumerate() {
            let a = a_row[c / 3] as u32;
            *d = ((s as u32 * a + *d as u32 * (255 - a) + 127) / 255) as u8;
        }
    }
    Ok(out)
}
