//! Benchmark harness: cumulative ablation presets, frame-rate sweeps,
//! cold versus warm initialisation, run statistics and the frame-rate
//! selection rule over the embedded smoothness study.
//!
//! Runs are interleaved round-robin across presets (or frame rates) after
//! one untimed warm-up pass each, so slow drift in machine load spreads
//! evenly over all rows instead of biasing whichever row ran last.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::fixtures::{bench_clip, face_template_region, synthetic_avatar, BENCH_AVATAR_EDGE};
use crate::orchestrator::{Engine, Utterance};
use crate::profiler::Profiler;
use crate::renderer::{
    detect_face, render_video, Detector, Progress, ProgressBar, RenderConfig, ResizePolicy,
    VideoFile, WriterKind,
};
use crate::types::{AudioBuffer, FaceBox, FrameRate, ImageBuffer};

pub const DEFAULT_REPETITIONS: usize = 5;

/// Runtimes (seconds, mean and SD over five runs) of the original GPU
/// pipeline. Reference inputs for arithmetic and formatting checks only.
pub mod reference {
    pub const ABLATION: [(&str, f64, f64); 5] = [
        ("baseline", 40.637, 0.320),
        ("mod1", 39.930, 0.116),
        ("mod2", 31.182, 0.526),
        ("mod3", 31.438, 0.579),
        ("mod4", 29.385, 0.284),
    ];

    /// `(fps, mean, sd)` with every optimisation enabled.
    pub const FPS_SWEEP: [(u32, f64, f64); 10] = [
        (25, 29.385, 0.284),
        (24, 28.525, 0.199),
        (23, 27.833, 0.137),
        (22, 26.842, 0.189),
        (21, 25.899, 0.301),
        (20, 25.041, 0.104),
        (19, 24.196, 0.217),
        (18, 23.026, 0.131),
        (17, 22.134, 0.131),
        (16, 21.241, 0.137),
    ];

    /// `(mean, sd)` of a 7 s, 25 fps generation without and with warm
    /// initialisation.
    pub const COLD: (f64, f64) = (33.19, 1.14);
    pub const WARM: (f64, f64) = (29.94, 1.11);
}

/// `(baseline − current) / baseline × 100` at full precision.
pub fn reduction_percent(baseline_mean_s: f64, current_mean_s: f64) -> Result<f64> {
    if !(baseline_mean_s > 0.0) {
        return Err(Error::NonPositiveBaseline(baseline_mean_s));
    }
    Ok((baseline_mean_s - current_mean_s) / baseline_mean_s * 100.0)
}

/// Rounds half away from zero to two decimals, for display.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Arithmetic mean and sample standard deviation (n − 1).
pub fn mean_sd(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    let n = samples.len() as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Summing in sorted order makes the result permutation-invariant.
    let mean = sorted.iter().sum::<f64>() / n;
    let mean = mean.clamp(sorted[0], sorted[sorted.len() - 1]);
    let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchStats {
    pub runs: Vec<f64>,
    pub mean_s: f64,
    pub sd_s: f64,
    pub reduction_vs_baseline_pct: f64,
}

impl BenchStats {
    pub fn from_runs(runs: Vec<f64>, baseline_mean_s: Option<f64>) -> Result<Self> {
        let (mean_s, sd_s) = mean_sd(&runs)?;
        let reduction_vs_baseline_pct = match baseline_mean_s {
            Some(b) => reduction_percent(b, mean_s)?,
            None => 0.0,
        };
        Ok(Self {
            runs,
            mean_s,
            sd_s,
            reduction_vs_baseline_pct,
        })
    }

    /// `mean ± sd` with three decimals.
    pub fn display(&self) -> String {
        format!("{:.3} ± {:.3}", self.mean_s, self.sd_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationPreset {
    Baseline,
    Mod1,
    Mod2,
    Mod3,
    Mod4,
}

/// Which optimisations a preset enables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modifications {
    pub progress_removed: bool,
    pub detection_optimized: bool,
    pub intermediates_removed: bool,
    pub streaming_writer: bool,
}

impl AblationPreset {
    pub const ALL: [AblationPreset; 5] = [
        AblationPreset::Baseline,
        AblationPreset::Mod1,
        AblationPreset::Mod2,
        AblationPreset::Mod3,
        AblationPreset::Mod4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationPreset::Baseline => "baseline",
            AblationPreset::Mod1 => "mod1",
            AblationPreset::Mod2 => "mod2",
            AblationPreset::Mod3 => "mod3",
            AblationPreset::Mod4 => "mod4",
        }
    }

    fn level(self) -> u8 {
        self as u8
    }

    pub fn modifications(self) -> Modifications {
        let l = self.level();
        Modifications {
            progress_removed: l >= 1,
            detection_optimized: l >= 2,
            intermediates_removed: l >= 3,
            streaming_writer: l >= 4,
        }
    }

    /// Each preset keeps every earlier preset's modifications; all run at 25 fps.
    pub fn config(self) -> RenderConfig {
        let m = self.modifications();
        let mut c = RenderConfig::baseline();
        c.progress_callbacks = !m.progress_removed;
        if m.detection_optimized {
            c.resize_policy = ResizePolicy::Fast256;
            c.detector = Detector::LightTracking;
            c.edge_blur = false;
        }
        c.persist_intermediates = !m.intermediates_removed;
        if m.streaming_writer {
            c.writer = WriterKind::Streaming;
        }
        c
    }
}

impl std::fmt::Display for AblationPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AblationPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown preset {s:?}")))
    }
}

/// The fixed render input: procedural avatar and the 7 s clip.
#[derive(Debug, Clone)]
pub struct BenchInput {
    pub avatar: ImageBuffer,
    pub face_box: FaceBox,
    pub clip: AudioBuffer,
}

impl BenchInput {
    pub fn standard(engine: &Engine) -> Result<Self> {
        let edge = BENCH_AVATAR_EDGE;
        let avatar = synthetic_avatar(edge, edge);
        let template = avatar.crop(face_template_region(edge, edge))?;
        let face_box = detect_face(&avatar, &template, Detector::HeavyExhaustive, None)?;
        Ok(Self {
            avatar,
            face_box,
            clip: bench_clip(engine.tones()),
        })
    }
}

/// Destination of the progress bar drawn by presets that keep progress
/// reporting on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProgressSink {
    #[default]
    Stderr,
    Discard,
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub repetitions: usize,
    pub warmup: bool,
    pub progress: ProgressSink,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            repetitions: DEFAULT_REPETITIONS,
            warmup: true,
            progress: ProgressSink::Stderr,
        }
    }
}

impl BenchOptions {
    pub fn with_repetitions(mut self, repetitions: usize) -> Self {
        self.repetitions = repetitions;
        self
    }
}

fn ensure_quiesced(engine: &Engine) -> Result<()> {
    match engine.jobs_in_flight() {
        0 => Ok(()),
        n => Err(Error::Busy(format!("{n} job(s) in flight; benchmarks need an idle engine"))),
    }
}

fn check_repetitions(repetitions: usize) -> Result<()> {
    if repetitions < 2 {
        return Err(Error::TooFewSamples(repetitions));
    }
    Ok(())
}

/// Wall seconds of one `render_video` call.
fn timed_render(input: &BenchInput, cfg: &RenderConfig, sink: ProgressSink, label: &str) -> Result<(f64, VideoFile)> {
    let profiler = Profiler::new();
    let out: Box<dyn Write> = match sink {
        ProgressSink::Stderr => Box::new(std::io::stderr()),
        ProgressSink::Discard => Box::new(std::io::sink()),
    };
    let mut bar = ProgressBar::new(out, label);
    let mut cb = |p: Progress| bar.update(p);
    let t = Instant::now();
    let video = render_video(&input.avatar, input.face_box, &input.clip, cfg, &profiler, Some(&mut cb))?;
    Ok((t.elapsed().as_secs_f64(), video))
}

/// Times `configs` round-robin; returns per-config run lists.
fn interleaved(input: &BenchInput, configs: &[(String, RenderConfig)], opts: &BenchOptions) -> Result<Vec<Vec<f64>>> {
    check_repetitions(opts.repetitions)?;
    if opts.warmup {
        for (label, cfg) in configs {
            timed_render(input, cfg, opts.progress, label)?;
        }
    }
    let mut runs = vec![Vec::with_capacity(opts.repetitions); configs.len()];
    for rep in 0..opts.repetitions {
        // Alternate direction so no config always follows the same neighbour.
        let order: Vec<usize> = if rep % 2 == 0 {
            (0..configs.len()).collect()
        } else {
            (0..configs.len()).rev().collect()
        };
        for i in order {
            let (label, cfg) = &configs[i];
            runs[i].push(timed_render(input, cfg, opts.progress, label)?.0);
        }
    }
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub preset: AblationPreset,
    pub modifications: Modifications,
    pub fps: u32,
    pub stats: BenchStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub repetitions: usize,
    pub clip_seconds: f64,
    pub avatar_edge: u32,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, preset: AblationPreset) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.preset == preset)
    }

    pub fn to_text(&self) -> String {
        let mark = |b: bool| if b { "yes" } else { "no" };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Ablation: {}-run average, {:.2} s clip, {}x{} avatar",
            self.repetitions, self.clip_seconds, self.avatar_edge, self.avatar_edge
        );
        let _ = writeln!(
            s,
            "{:<9} | {:^12} | {:^12} | {:^16} | {:^9} | {:>3} | Run-time (seconds)",
            "Preset", "No progress", "Fast detect", "No intermediates", "Streaming", "FPS"
        );
        for r in &self.rows {
            let m = r.modifications;
            let _ = write!(
                s,
                "{:<9} | {:^12} | {:^12} | {:^16} | {:^9} | {:>3} | {}",
                r.preset.name(),
                mark(m.progress_removed),
                mark(m.detection_optimized),
                mark(m.intermediates_removed),
                mark(m.streaming_writer),
                r.fps,
                r.stats.display()
            );
            if r.preset != AblationPreset::Baseline {
                let _ = write!(s, " ({:+.2}%)", -round2(r.stats.reduction_vs_baseline_pct));
            }
            s.push('\n');
        }
        s
    }
}

/// Times each preset on `input`; reductions are relative to the baseline
/// row when present.
pub fn run_ablation(engine: &Engine, presets: &[AblationPreset], input: &BenchInput, opts: &BenchOptions) -> Result<AblationReport> {
    ensure_quiesced(engine)?;
    if presets.is_empty() {
        return Err(Error::precondition("no presets selected"));
    }
    let configs: Vec<_> = presets.iter().map(|p| (p.name().to_owned(), p.config())).collect();
    let runs = interleaved(input, &configs, opts)?;
    let baseline = match presets.iter().position(|p| *p == AblationPreset::Baseline) {
        Some(i) => Some(mean_sd(&runs[i])?.0),
        None => None,
    };
    let rows = presets
        .iter()
        .zip(runs)
        .map(|(&preset, runs)| {
            Ok(AblationRow {
                preset,
                modifications: preset.modifications(),
                fps: preset.config().fps.get(),
                stats: BenchStats::from_runs(runs, baseline)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AblationReport {
        repetitions: opts.repetitions,
        clip_seconds: input.clip.duration_s(),
        avatar_edge: input.avatar.width(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpsRow {
    pub fps: u32,
    pub frames: u32,
    pub stats: BenchStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpsSweepReport {
    pub repetitions: usize,
    pub clip_seconds: f64,
    pub avatar_edge: u32,
    /// Rows in ascending fps; reductions are relative to the highest fps.
    pub rows: Vec<FpsRow>,
    /// 20 fps against 25 fps, when both were measured.
    pub reduction_20_vs_25_pct: Option<f64>,
}

impl FpsSweepReport {
    pub fn row(&self, fps: u32) -> Option<&FpsRow> {
        self.rows.iter().find(|r| r.fps == fps)
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].stats.mean_s < w[1].stats.mean_s)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "FPS sweep: {}-run average, {:.2} s clip, {}x{} avatar, all optimisations on",
            self.repetitions, self.clip_seconds, self.avatar_edge, self.avatar_edge
        );
        let _ = writeln!(s, "{:>3} | {:>6} | Run-time (seconds)", "FPS", "Frames");
        for r in self.rows.iter().rev() {
            let _ = writeln!(s, "{:>3} | {:>6} | {}", r.fps, r.frames, r.stats.display());
        }
        if let Some(p) = self.reduction_20_vs_25_pct {
            let _ = writeln!(s, "20 fps vs 25 fps: {:.2}% less run-time", round2(p));
        }
        s
    }
}

/// Times the fully optimised config at each frame rate.
pub fn fps_sweep(engine: &Engine, fps_list: &[u32], input: &BenchInput, opts: &BenchOptions) -> Result<FpsSweepReport> {
    ensure_quiesced(engine)?;
    if fps_list.is_empty() {
        return Err(Error::precondition("no frame rates selected"));
    }
    let mut rates = Vec::with_capacity(fps_list.len());
    for &f in fps_list {
        rates.push(FrameRate::new(f).map_err(|e| Error::Config(e.to_string()))?);
    }
    rates.sort();
    rates.dedup();
    let base = AblationPreset::Mod4.config();
    let configs: Vec<_> = rates.iter().map(|&r| (format!("{r} fps"), base.with_fps(r))).collect();
    let runs = interleaved(input, &configs, opts)?;
    let top = mean_sd(runs.last().expect("non-empty"))?.0;
    let rows: Vec<FpsRow> = rates
        .iter()
        .zip(runs)
        .map(|(&r, runs)| {
            Ok(FpsRow {
                fps: r.get(),
                frames: input.clip.frame_count(r),
                stats: BenchStats::from_runs(runs, Some(top))?,
            })
        })
        .collect::<Result<_>>()?;
    let mean = |f: u32| rows.iter().find(|r| r.fps == f).map(|r| r.stats.mean_s);
    let reduction_20_vs_25_pct = match (mean(25), mean(20)) {
        (Some(a), Some(b)) => Some(reduction_percent(a, b)?),
        _ => None,
    };
    Ok(FpsSweepReport {
        repetitions: opts.repetitions,
        clip_seconds: input.clip.duration_s(),
        avatar_edge: input.avatar.width(),
        rows,
        reduction_20_vs_25_pct,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmColdReport {
    pub repetitions: usize,
    pub cold: BenchStats,
    pub warm: BenchStats,
    pub reduction_pct: f64,
}

impl WarmColdReport {
    pub fn to_text(&self) -> String {
        format!(
            "cold (initialize + generate): {}\nwarm (generate):              {}\nreduction: {:.2}%\n",
            self.cold.display(),
            self.warm.display(),
            round2(self.reduction_pct)
        )
    }
}

/// One generation request: open a session on `avatar_png` and render
/// `input` in content mode.
fn generate(engine: &Engine, avatar_png: &[u8], input: &Utterance) -> Result<()> {
    let session = engine.create_session(avatar_png)?;
    engine.content(&session, input, engine.default_fps())?;
    Ok(())
}

/// Compares building a fresh engine per request with reusing one built
/// ahead of time. Runs alternate cold and warm.
pub fn warm_cold(config: &Config, avatar_png: &[u8], input: &Utterance, repetitions: usize) -> Result<WarmColdReport> {
    check_repetitions(repetitions)?;
    let warm_engine = Engine::build(config, Arc::new(Profiler::new()))?;
    generate(&warm_engine, avatar_png, input)?;
    let (mut cold, mut warm) = (Vec::new(), Vec::new());
    for _ in 0..repetitions {
        let t = Instant::now();
        let engine = Engine::build(config, Arc::new(Profiler::new()))?;
        generate(&engine, avatar_png, input)?;
        cold.push(t.elapsed().as_secs_f64());
        drop(engine);

        let t = Instant::now();
        generate(&warm_engine, avatar_png, input)?;
        warm.push(t.elapsed().as_secs_f64());
    }
    let cold = BenchStats::from_runs(cold, None)?;
    let warm = BenchStats::from_runs(warm, Some(cold.mean_s))?;
    let reduction_pct = warm.reduction_vs_baseline_pct;
    Ok(WarmColdReport {
        repetitions,
        cold,
        warm,
        reduction_pct,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpsStudyRow {
    pub fps: u32,
    pub mean_score: f64,
    pub sd: f64,
    pub min: u8,
    pub max: u8,
}

const FPS_STUDY_V1: &str = include_str!("../data/fps_study_v1.csv");

/// Parses `fps,mean,sd,min,max` rows; `#` lines and the header are skipped.
pub fn parse_fps_study(text: &str) -> Result<Vec<FpsStudyRow>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != "fps,mean,sd,min,max" {
                return Err(Error::Format(format!("line {}: unexpected header {line:?}", n + 1)));
            }
            header_seen = true;
            continue;
        }
        let bad = || Error::Format(format!("line {}: malformed row {line:?}", n + 1));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(bad());
        }
        let row = FpsStudyRow {
            fps: f[0].parse().map_err(|_| bad())?,
            mean_score: f[1].parse().map_err(|_| bad())?,
            sd: f[2].parse().map_err(|_| bad())?,
            min: f[3].parse().map_err(|_| bad())?,
            max: f[4].parse().map_err(|_| bad())?,
        };
        let in_scale = |v: f64| (1.0..=5.0).contains(&v);
        if !in_scale(row.mean_score) || !in_scale(row.min as f64) || !in_scale(row.max as f64) || row.min > row.max || row.sd < 0.0 {
            return Err(Error::Format(format!("line {}: values outside the 1-5 scale", n + 1)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// The embedded nine-row smoothness study (16 to 24 fps).
pub fn fps_study() -> Vec<FpsStudyRow> {
    parse_fps_study(FPS_STUDY_V1).expect("embedded study is well formed")
}

/// Scores closer than this are treated as equal.
const SCORE_EPSILON: f64 = 1e-9;

/// Smallest fps whose mean score is within `tolerance` of the best score.
pub fn select_fps(study: &[FpsStudyRow], tolerance: f64) -> Result<u32> {
    if study.is_empty() {
        return Err(Error::precondition("study has no rows"));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::precondition(format!("tolerance {tolerance} is negative")));
    }
    let best = study.iter().map(|r| r.mean_score).fold(f64::NEG_INFINITY, f64::max);
    let floor = best - tolerance - SCORE_EPSILON;
    Ok(study
        .iter()
        .filter(|r| r.mean_score >= floor)
        .map(|r| r.fps)
        .min()
        .expect("best row qualifies"))
}
