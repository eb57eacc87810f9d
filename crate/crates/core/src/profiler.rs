//! Named-span profiler: per-name call counts and cumulative time, rendered
//! as a hotspot list sorted by cumulative time.
//!
//! Nested spans each record their full duration, so entries overlap and
//! need not add up to the total elapsed time.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Default, Clone, Copy)]
struct Accum {
    total_ns: u128,
    calls: u64,
}

/// Thread-safe registry of span timings.
#[derive(Debug)]
pub struct Profiler {
    entries: Mutex<HashMap<String, Accum>>,
    started: Mutex<Instant>,
}

impl Default for Profiler {
    fn default() -> Self {
        Self::new()
    }
}

impl Profiler {
    pub fn new() -> Self {
        Self {
            entries: Mutex::new(HashMap::new()),
            started: Mutex::new(Instant::now()),
        }
    }

    /// Adds one call of `elapsed_ns` to `name`.
    pub fn record(&self, name: &str, elapsed_ns: u64) {
        let mut map = self.entries.lock();
        match map.get_mut(name) {
            Some(acc) => {
                acc.total_ns += elapsed_ns as u128;
                acc.calls += 1;
            }
            None => {
                map.insert(
                    name.to_owned(),
                    Accum {
                        total_ns: elapsed_ns as u128,
                        calls: 1,
                    },
                );
            }
        }
    }

    /// Starts a span that records itself when dropped.
    pub fn span<'a>(&'a self, name: &'a str) -> SpanGuard<'a> {
        SpanGuard {
            profiler: self,
            name,
            start: Instant::now(),
        }
    }

    /// Times `f` under `name`.
    pub fn time<T>(&self, name: &str, f: impl FnOnce() -> T) -> T {
        let _g = self.span(name);
        f()
    }

    pub fn calls(&self, name: &str) -> u64 {
        self.entries.lock().get(name).map_or(0, |a| a.calls)
    }

    pub fn reset(&self) {
        self.entries.lock().clear();
        *self.started.lock() = Instant::now();
    }

    /// Consistent point-in-time snapshot.
    pub fn report(&self) -> ProfileReport {
        let raw: Vec<(String, Accum)> = {
            let map = self.entries.lock();
            map.iter().map(|(k, v)| (k.clone(), *v)).collect()
        };
        let total_elapsed_s = self.started.lock().elapsed().as_secs_f64();
        let mut entries: Vec<ProfileEntry> = raw
            .into_iter()
            .map(|(name, acc)| ProfileEntry {
                name,
                cumulative_ns: acc.total_ns,
                calls: acc.calls,
            })
            .collect();
        entries.sort_by(|a, b| {
            b.cumulative_ns
                .cmp(&a.cumulative_ns)
                .then_with(|| a.name.cmp(&b.name))
        });
        ProfileReport {
            entries,
            total_elapsed_s,
        }
    }

    pub fn render_report(&self) -> String {
        self.report().render()
    }
}

pub struct SpanGuard<'a> {
    profiler: &'a Profiler,
    name: &'a str,
    start: Instant,
}

impl Drop for SpanGuard<'_> {
    fn drop(&mut self) {
        let ns = self.start.elapsed().as_nanos().min(u64::MAX as u128) as u64;
        self.profiler.record(self.name, ns);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileEntry {
    pub name: String,
    pub cumulative_ns: u128,
    pub calls: u64,
}

impl ProfileEntry {
    pub fn cumulative_s(&self) -> f64 {
        self.cumulative_ns as f64 / 1e9
    }
}

#[derive(Debug, Clone)]
pub struct ProfileReport {
    pub entries: Vec<ProfileEntry>,
    pub total_elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntryJson {
    pub name: String,
    pub cumulative_s: f64,
    pub calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReportJson {
    pub total_s: f64,
    pub entries: Vec<ProfileEntryJson>,
}

impl ProfileReport {
    /// One `name = S.SSs (calls)` line per entry; seconds rounded half-up.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let centis = (e.cumulative_ns + 5_000_000) / 10_000_000;
            let _ = writeln!(
                out,
                "{} = {}.{:02}s ({})",
                e.name,
                centis / 100,
                centis % 100,
                e.calls
            );
        }
        out
    }

    pub fn to_json(&self) -> ProfileReportJson {
        ProfileReportJson {
            total_s: self.total_elapsed_s,
            entries: self
                .entries
                .iter()
                .map(|e| ProfileEntryJson {
                    name: e.name.clone(),
                    cumulative_s: e.cumulative_s(),
                    calls: e.calls,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::Arc;

    const SEC: u64 = 1_000_000_000;

    #[test]
    fn records_are_additive() {
        let p = Profiler::new();
        p.record("x", SEC);
        p.record("x", SEC);
        let r = p.report();
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].cumulative_s(), 2.0);
        assert_eq!(r.entries[0].calls, 2);
    }

    #[test]
    fn empty_registry_renders_empty() {
        let p = Profiler::new();
        assert!(p.report().entries.is_empty());
        assert_eq!(p.render_report(), "");
    }

    #[test]
    fn sorted_descending() {
        let p = Profiler::new();
        p.record("a", 3);
        p.record("b", 5);
        let names: Vec<_> = p.report().entries.into_iter().map(|e| e.name).collect();
        assert_eq!(names, ["b", "a"]);
    }

    #[test]
    fn ties_break_by_name() {
        let p = Profiler::new();
        p.record("zeta", 7);
        p.record("alpha", 7);
        let names: Vec<_> = p.report().entries.into_iter().map(|e| e.name).collect();
        assert_eq!(names, ["alpha", "zeta"]);
    }

    #[test]
    fn render_line_format() {
        let p = Profiler::new();
        p.record("mimwrite", 12_150_000_000);
        p.record("mimwrite", 12_150_000_000);
        assert_eq!(p.render_report(), "mimwrite = 24.30s (2)\n");

        let p = Profiler::new();
        p.record("a", 1_005_000_000);
        assert_eq!(p.render_report(), "a = 1.01s (1)\n");
    }

    #[test]
    fn nested_spans_both_record() {
        let p = Profiler::new();
        {
            let _outer = p.span("outer");
            let _inner = p.span("inner");
        }
        assert_eq!(p.calls("outer"), 1);
        assert_eq!(p.calls("inner"), 1);
    }

    #[test]
    fn concurrent_recording_counts_everything() {
        let p = Arc::new(Profiler::new());
        let (n, m) = (8, 500);
        let handles: Vec<_> = (0..n)
            .map(|_| {
                let p = Arc::clone(&p);
                std::thread::spawn(move || {
                    for _ in 0..m {
                        p.record("shared", 1);
                        let _ = p.report();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(p.calls("shared"), (n * m) as u64);
        assert_eq!(p.report().entries[0].cumulative_ns, (n * m) as u128);
    }

    #[test]
    fn json_shape() {
        let p = Profiler::new();
        p.record("gaussian_blur", 2 * SEC);
        let v = serde_json::to_value(p.report().to_json()).unwrap();
        assert!(v["total_s"].is_number());
        assert_eq!(v["entries"][0]["name"], "gaussian_blur");
        assert_eq!(v["entries"][0]["cumulative_s"], 2.0);
        assert_eq!(v["entries"][0]["calls"], 1);
    }

    proptest! {
        #[test]
        fn cumulative_equals_exact_sum(values in proptest::collection::vec(0u64..10_000_000_000, 1..64)) {
            let p = Profiler::new();
            for &v in &values {
                p.record("n", v);
            }
            let expected: u128 = values.iter().map(|&v| v as u128).sum();
            let r = p.report();
            prop_assert_eq!(r.entries[0].cumulative_ns, expected);
            prop_assert_eq!(r.entries[0].calls, values.len() as u64);
        }

        #[test]
        fn report_order_is_total(recs in proptest::collection::vec(("[a-d]", 0u64..5), 0..40)) {
            let p = Profiler::new();
            for (name, v) in &recs {
                p.record(name, *v);
            }
            let e = p.report().entries;
            for w in e.windows(2) {
                prop_assert!(
                    w[0].cumulative_ns > w[1].cumulative_ns
                        || (w[0].cumulative_ns == w[1].cumulative_ns && w[0].name < w[1].name)
                );
            }
        }
    }
}
