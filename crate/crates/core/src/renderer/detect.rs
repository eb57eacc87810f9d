//! Template face detection by normalised cross-correlation on luma.
//!
//! All window statistics are exact integers (integral images for the
//! window sums, direct dot products for the cross term); only the final
//! ratio is floating point, so results are bit-identical across platforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FaceBox, ImageBuffer};

/// Pixels the tracker may move from the previous box in each direction.
pub const TRACKING_RADIUS: u32 = 8;

/// Correlations below this mean "no face".
pub const MIN_CORRELATION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    /// Scores every placement in the frame.
    HeavyExhaustive,
    /// Scores placements within [`TRACKING_RADIUS`] of the previous box.
    LightTracking,
}

/// Template luma plus its precomputed sums.
#[derive(Debug, Clone)]
pub struct PreparedTemplate {
    width: u32,
    height: u32,
    luma: Vec<u8>,
    sum: i128,
    var_n: i128,
}

impl PreparedTemplate {
    pub fn new(template: &ImageBuffer) -> Self {
        let luma = template.luma();
        let n = luma.len() as i128;
        let sum: i128 = luma.iter().map(|&v| v as i128).sum();
        let sq: i128 = luma.iter().map(|&v| (v as i128) * (v as i128)).sum();
        Self {
            width: template.width(),
            height: template.height(),
            luma,
            sum,
            var_n: n * sq - sum * sum,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }
}

/// Frame luma with summed-area tables for window sums.
struct PreparedFrame {
    width: usize,
    height: usize,
    luma: Vec<u8>,
    sat: Vec<u64>,
    sat_sq: Vec<u64>,
}

impl PreparedFrame {
    fn new(frame: &ImageBuffer) -> Self {
        let (w, h) = (frame.width() as usize, frame.height() as usize);
        let luma = frame.luma();
        let stride = w + 1;
        let mut sat = vec![0u64; stride * (h + 1)];
        let mut sat_sq = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let (mut row, mut row_sq) = (0u64, 0u64);
            for x in 0..w {
                let v = luma[y * w + x] as u64;
                row += v;
                row_sq += v * v;
                sat[(y + 1) * stride + x + 1] = sat[y * stride + x + 1] + row;
                sat_sq[(y + 1) * stride + x + 1] = sat_sq[y * stride + x + 1] + row_sq;
            }
        }
        Self {
            width: w,
            height: h,
            luma,
            sat,
            sat_sq,
        }
    }

    fn window_sums(&self, x: usize, y: usize, tw: usize, th: usize) -> (i128, i128) {
        let s = self.width + 1;
        let rect = |t: &[u64]| {
            (t[(y + th) * s + x + tw] + t[y * s + x]) as i128
                - (t[y * s + x + tw] + t[(y + th) * s + x]) as i128
        };
        (rect(&self.sat), rect(&self.sat_sq))
    }

    fn cross(&self, x: usize, y: usize, tpl: &PreparedTemplate) -> i128 {
        let (tw, th) = (tpl.width as usize, tpl.height as usize);
        let mut acc = 0u64;
        for r in 0..th {
            let f = &self.luma[(y + r) * self.width + x..][..tw];
            let t = &tpl.luma[r * tw..][..tw];
            let row: u32 = f.iter().zip(t).map(|(&a, &b)| a as u32 * b as u32).sum();
            acc += row as u64;
        }
        acc as i128
    }

    fn score(&self, x: usize, y: usize, tpl: &PreparedTemplate) -> f64 {
        let n = tpl.luma.len() as i128;
        let (sum_f, sq_f) = self.window_sums(x, y, tpl.width as usize, tpl.height as usize);
        let var_f = n * sq_f - sum_f * sum_f;
        if var_f <= 0 || tpl.var_n <= 0 {
            return 0.0;
        }
        let num = n * self.cross(x, y, tpl) - sum_f * tpl.sum;
        num as f64 / ((var_f as f64).sqrt() * (tpl.var_n as f64).sqrt())
    }
}

/// Best-scoring placement of `template` in `frame`.
pub fn detect_face(
    frame: &ImageBuffer,
    template: &ImageBuffer,
    mode: Detector,
    prev: Option<FaceBox>,
) -> Result<FaceBox> {
    detect_prepared(frame, &PreparedTemplate::new(template), mode, prev)
}

/// [`detect_face`] with the template statistics computed once by the caller.
pub fn detect_prepared(
    frame: &ImageBuffer,
    template: &PreparedTemplate,
    mode: Detector,
    prev: Option<FaceBox>,
) -> Result<FaceBox> {
    let (tw, th) = (template.width, template.height);
    if tw > frame.width() || th > frame.height() {
        return Err(Error::precondition(format!(
            "template {tw}x{th} larger than frame {}x{}",
            frame.width(),
            frame.height()
        )));
    }
    let max_x = frame.width() - tw;
    let max_y = frame.height() - th;
    let (xs, ys) = match (mode, prev) {
        (Detector::LightTracking, Some(p)) => (
            p.x.saturating_sub(TRACKING_RADIUS).min(max_x)..=(p.x + TRACKING_RADIUS).min(max_x),
            p.y.saturating_sub(TRACKING_RADIUS).min(max_y)..=(p.y + TRACKING_RADIUS).min(max_y),
        ),
        _ => (0..=max_x, 0..=max_y),
    };
    let prepared = PreparedFrame::new(frame);
    debug_assert_eq!(prepared.height, frame.height() as usize);
    let mut best = f64::NEG_INFINITY;
    let mut at = (0u32, 0u32);
    for y in ys {
        for x in xs.clone() {
            let s = prepared.score(x as usize, y as usize, template);
            if s > best {
                best = s;
                at = (x, y);
            }
        }
    }
    if best < MIN_CORRELATION {
        return Err(Error::NoFace { best });
    }
    Ok(FaceBox::new(at.0, at.1, tw, th))
}
