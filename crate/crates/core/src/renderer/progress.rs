use std::io::Write;
use std::time::Instant;

/// Per-frame progress notification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    /// Frames completed so far, 1-based.
    pub frame: u32,
    pub total: u32,
}

/// Terminal-style progress bar redrawn on every update.
pub struct ProgressBar<W: Write> {
    out: W,
    label: String,
    started: Instant,
    line: String,
}

impl<W: Write> ProgressBar<W> {
    pub fn new(out: W, label: impl Into<String>) -> Self {
        Self {
            out,
            label: label.into(),
            started: Instant::now(),
            line: String::with_capacity(128),
        }
    }

    pub fn update(&mut self, p: Progress) {
        use std::fmt::Write as _;
        const WIDTH: u32 = 24;
        let elapsed = self.started.elapsed().as_secs_f64();
        let rate = if elapsed > 0.0 { p.frame as f64 / elapsed } else { 0.0 };
        let eta = if rate > 0.0 {
            (p.total.saturating_sub(p.frame)) as f64 / rate
        } else {
            0.0
        };
        let filled = (p.frame * WIDTH).checked_div(p.total).unwrap_or(WIDTH);
        self.line.clear();
        let _ = write!(
            self.line,
            "\r{}: {:3}%|",
            self.label,
            (p.frame * 100).checked_div(p.total).unwrap_or(100)
        );
        for i in 0..WIDTH {
            self.line.push(if i < filled { '#' } else { ' ' });
        }
        let _ = write!(
            self.line,
            "| {}/{} [{:.2}s<{:.2}s, {:.2}it/s]",
            p.frame, p.total, elapsed, eta, rate
        );
        if p.frame == p.total {
            self.line.push('\n');
        }
        let _ = self.out.write_all(self.line.as_bytes());
        let _ = self.out.flush();
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
