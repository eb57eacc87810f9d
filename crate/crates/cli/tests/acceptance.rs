//! End-to-end acceptance run. Prints one `[PASS]` or `[FAIL]` line per
//! criterion and exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::{Arc, Barrier};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestCaseError, TestRunner};
use sha2::{Digest, Sha256};
use utalk_core::bench::{
    fps_study, fps_sweep, reduction_percent, reference, run_ablation, select_fps, warm_cold, AblationPreset,
    BenchInput, BenchOptions,
};
use utalk_core::codec::{encode_png, encode_wav};
use utalk_core::config::{BackendKind, Config};
use utalk_core::fixtures::{bench_clip, face_template_region, synthetic_avatar, BENCH_AVATAR_EDGE};
use utalk_core::orchestrator::{AvatarSession, Engine, Utterance};
use utalk_core::profiler::Profiler;
use utalk_core::renderer::{render_video, Detector, RenderConfig, WriterKind};
use utalk_core::types::{AudioBuffer, FrameRate, CANONICAL_SAMPLE_RATE};
use utalk_core::Error;
use utalk_service::AppState;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fps(n: u32) -> FrameRate {
    FrameRate::new(n).expect("valid fps")
}

fn engine() -> Engine {
    Engine::build(&Config::default(), Arc::new(Profiler::new())).expect("engine builds")
}

fn sha(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Server {
    base: String,
    state: Arc<AppState>,
    _rt: tokio::runtime::Runtime,
    _dir: tempfile::TempDir,
}

fn start_server() -> Server {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = Config {
        video_dir: dir.path().join("videos"),
        ..Config::default()
    };
    let state = Arc::new(AppState::new(config).expect("state"));
    let rt = tokio::runtime::Runtime::new().expect("runtime");
    let listener = rt
        .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
        .expect("bind");
    let base = format!("http://{}", listener.local_addr().expect("addr"));
    rt.spawn(utalk_service::serve(Arc::clone(&state), listener, std::future::pending()));
    Server {
        base,
        state,
        _rt: rt,
        _dir: dir,
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(120)))
        .build()
        .into()
}

fn create_session(agent: &ureq::Agent, base: &str, png: &[u8]) -> Result<String, String> {
    let mut resp = agent
        .post(format!("{base}/sessions"))
        .header("content-type", "image/png")
        .send(png)
        .map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    let body: serde_json::Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
    ensure(status == 200, format!("POST /sessions returned {status}: {body}"))?;
    Ok(body["session_id"].as_str().ok_or("no session_id")?.to_owned())
}

fn reduction_arithmetic() -> Outcome {
    let t = Instant::now();
    let cases = [
        (40.637, 29.385, 27.69),
        (40.637, 25.041, 38.38),
        (40.637, 39.930, 1.74),
        (40.637, 31.182, 23.27),
        (40.637, 31.438, 22.64),
        (33.19, 29.94, 9.79),
    ];
    let mut got = Vec::new();
    for (b, c, want) in cases {
        let r = reduction_percent(b, c).map_err(|e| e.to_string())?;
        ensure((r - want).abs() <= 0.005, format!("reduction({b}, {c}) = {r:.4}, want {want}"))?;
        got.push(format!("{r:.2}"));
    }
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(got.join(", "))
}

fn frame_accounting() -> Outcome {
    let engine = engine();
    let input = BenchInput::standard(&engine).map_err(|e| e.to_string())?;
    let profiler = Profiler::new();
    let cfg = RenderConfig::baseline().with_fps(fps(25));
    ensure(cfg.edge_blur, "baseline must blur edges")?;
    let video = render_video(&input.avatar, input.face_box, &input.clip, &cfg, &profiler, None)
        .map_err(|e| e.to_string())?;
    let frames = video.frame_count();
    let blurs = profiler.calls("gaussian_blur");
    ensure(frames == 175, format!("{frames} frames, want 175"))?;
    ensure(blurs == 350, format!("{blurs} gaussian_blur calls, want 350"))?;
    Ok(format!("{frames} frames, {blurs} gaussian_blur calls"))
}

fn ablation_direction() -> Outcome {
    let t = Instant::now();
    let engine = engine();
    let input = BenchInput::standard(&engine).map_err(|e| e.to_string())?;
    let report = run_ablation(&engine, &AblationPreset::ALL, &input, &BenchOptions::default())
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    print!("{}", report.to_text());
    let mean = |p| report.row(p).map(|r| r.stats.mean_s).ok_or(format!("missing row {p}"));
    let (base, m1, m2, m4) = (
        mean(AblationPreset::Baseline)?,
        mean(AblationPreset::Mod1)?,
        mean(AblationPreset::Mod2)?,
        mean(AblationPreset::Mod4)?,
    );
    let detail = format!(
        "baseline {base:.3}s, mod1 {m1:.3}s, mod2 {m2:.3}s, mod4 {m4:.3}s, harness {:.1}s",
        elapsed.as_secs_f64()
    );
    ensure(m1 <= base, format!("mod1 slower than baseline; {detail}"))?;
    ensure(m2 <= 0.9 * m1, format!("mod2 not at least 10% below mod1; {detail}"))?;
    ensure(m4 < m2, format!("mod4 not below mod2; {detail}"))?;
    ensure(elapsed < Duration::from_secs(300), format!("harness over 5 min; {detail}"))?;
    Ok(detail)
}

fn fps_monotonicity() -> Outcome {
    let engine = engine();
    let input = BenchInput::standard(&engine).map_err(|e| e.to_string())?;
    let list: Vec<u32> = (16..=25).collect();
    let report = fps_sweep(&engine, &list, &input, &BenchOptions::default()).map_err(|e| e.to_string())?;
    let text = report.to_text();
    print!("{text}");
    for row in &report.rows {
        ensure(
            text.contains(&row.stats.display()),
            format!("report lacks mean ± sd for {} fps", row.fps),
        )?;
    }
    let means: Vec<String> = report.rows.iter().map(|r| format!("{}:{:.3}", r.fps, r.stats.mean_s)).collect();
    ensure(
        report.is_strictly_increasing(),
        format!("means not strictly increasing: {}", means.join(" ")),
    )?;
    Ok(format!("strictly increasing over {} rates", report.rows.len()))
}

fn fps_selection() -> Outcome {
    let study = fps_study();
    let tolerant = select_fps(&study, 0.05).map_err(|e| e.to_string())?;
    let strict = select_fps(&study, 0.0).map_err(|e| e.to_string())?;
    ensure(tolerant == 20, format!("tolerance 0.05 selected {tolerant}, want 20"))?;
    ensure(strict == 23, format!("tolerance 0 selected {strict}, want 23"))?;
    Ok(format!("0.05 -> {tolerant}, 0 -> {strict}"))
}

fn random_render_case() -> impl Strategy<Value = (u32, u32, Vec<i16>, u32, bool, bool, bool, bool)> {
    (
        64u32..=112,
        64u32..=112,
        prop::collection::vec(any::<i16>(), 1..12_000),
        16u32..=60,
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
    )
}

fn writer_equivalence() -> Outcome {
    let mut runner = TestRunner::new(PtConfig::with_cases(100));
    let frames = std::cell::Cell::new(0u64);
    let result = runner.run(&random_render_case(), |(w, h, samples, rate, fast, light, blur, persist)| {
        let avatar = synthetic_avatar(w, h);
        let face_box = face_template_region(w, h);
        let audio = AudioBuffer::canonical(samples);
        let mut cfg = RenderConfig::baseline().with_fps(fps(rate));
        cfg.progress_callbacks = false;
        cfg.resize_policy = if fast {
            utalk_core::renderer::ResizePolicy::Fast256
        } else {
            utalk_core::renderer::ResizePolicy::Full512
        };
        cfg.detector = if light { Detector::LightTracking } else { Detector::HeavyExhaustive };
        cfg.edge_blur = blur;
        cfg.persist_intermediates = persist;
        let p = Profiler::new();
        let buffered = render_video(&avatar, face_box, &audio, &RenderConfig { writer: WriterKind::Buffered, ..cfg }, &p, None)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let streaming = render_video(&avatar, face_box, &audio, &RenderConfig { writer: WriterKind::Streaming, ..cfg }, &p, None)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(buffered.bytes(), streaming.bytes());
        frames.set(frames.get() + u64::from(buffered.frame_count()));
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok(format!("100 randomized renders byte-identical ({} frames)", frames.get()))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let engine = engine();
    let png = encode_png(&synthetic_avatar(96, 96)).map_err(|e| e.to_string())?;
    let wav = encode_wav(&engine.tones().synthesize("make videos fast")).map_err(|e| e.to_string())?;
    std::fs::write(dir.path().join("avatar.png"), &png).map_err(|e| e.to_string())?;
    std::fs::write(dir.path().join("speech.wav"), &wav).map_err(|e| e.to_string())?;
    let mut digests = Vec::new();
    for out in ["a.uvid", "b.uvid"] {
        let status = Command::new(env!("CARGO_BIN_EXE_utalk"))
            .current_dir(dir.path())
            .env_remove("RUST_LOG")
            .args(["generate", "--image", "avatar.png", "--audio", "speech.wav", "--out", out])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), String::from_utf8_lossy(&status.stderr).into_owned())?;
        digests.push(sha(&std::fs::read(dir.path().join(out)).map_err(|e| e.to_string())?));
    }
    ensure(digests[0] == digests[1], format!("process outputs differ: {} vs {}", digests[0], digests[1]))?;

    let input = BenchInput::standard(&engine).map_err(|e| e.to_string())?;
    let render = |cfg: &RenderConfig| -> Result<String, String> {
        render_video(&input.avatar, input.face_box, &input.clip, cfg, &Profiler::new(), None)
            .map(|v| sha(v.bytes()))
            .map_err(|e| e.to_string())
    };
    let mut toggles = 0;
    for base in [RenderConfig::default(), RenderConfig::baseline()] {
        let reference = render(&base)?;
        let variants = [
            ("progress_callbacks", RenderConfig { progress_callbacks: !base.progress_callbacks, ..base }),
            ("persist_intermediates", RenderConfig { persist_intermediates: !base.persist_intermediates, ..base }),
            (
                "writer",
                RenderConfig {
                    writer: match base.writer {
                        WriterKind::Buffered => WriterKind::Streaming,
                        WriterKind::Streaming => WriterKind::Buffered,
                    },
                    ..base
                },
            ),
            (
                "detector",
                RenderConfig {
                    detector: match base.detector {
                        Detector::HeavyExhaustive => Detector::LightTracking,
                        Detector::LightTracking => Detector::HeavyExhaustive,
                    },
                    ..base
                },
            ),
        ];
        for (name, cfg) in variants {
            ensure(render(&cfg)? == reference, format!("toggling {name} changed the video"))?;
            toggles += 1;
        }
    }
    Ok(format!("two processes agree ({}), {toggles} single toggles byte-identical", &digests[0][..12]))
}

#[derive(Debug, Clone)]
enum Step {
    Words(Vec<String>),
    Empty,
    FixtureAudio(usize),
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        prop::collection::vec("[a-z]{1,5}", 1..5).prop_map(Step::Words),
        Just(Step::Empty),
        (0usize..4).prop_map(Step::FixtureAudio),
    ]
}

fn exchanges(session: &AvatarSession) -> Vec<(String, String)> {
    session
        .context()
        .exchanges()
        .map(|e| (e.question().to_owned(), e.answer().to_owned()))
        .collect()
}

fn pipeline_semantics() -> Outcome {
    let engine = engine();
    let png = encode_png(&synthetic_avatar(64, 64)).map_err(|e| e.to_string())?;
    let mut session = engine.create_session(&png).map_err(|e| e.to_string())?;
    match engine.chat(&mut session, &Utterance::Text("hello".into()), fps(16)) {
        Err(Error::SilentInput { words: 1 }) => {}
        other => return Err(format!("library: expected SilentInput, got {:?}", other.map(|o| o.answer))),
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    std::fs::write(dir.path().join("avatar.png"), &png).map_err(|e| e.to_string())?;
    let cli = Command::new(env!("CARGO_BIN_EXE_utalk"))
        .current_dir(dir.path())
        .args(["generate", "--mode", "chat", "--image", "avatar.png", "--text", "hello", "--out", "x.uvid"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(cli.status.code() == Some(3), format!("CLI exit {:?}, want 3", cli.status.code()))?;

    let server = start_server();
    let agent = agent();
    let id = create_session(&agent, &server.base, &png)?;
    let mut resp = agent
        .post(format!("{}/sessions/{id}/chat", server.base))
        .send_json(serde_json::json!({ "text": "hello" }))
        .map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    let body: serde_json::Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
    ensure(status == 422 && body["error"] == "silent_input", format!("HTTP {status} {body}"))?;

    let fixtures: Vec<AudioBuffer> = utalk_core::fixtures::FIXTURE_PHRASES
        .iter()
        .map(|p| engine.tones().synthesize(p))
        .collect();
    let mut runner = TestRunner::new(PtConfig::with_cases(50));
    let requests = std::cell::Cell::new(0usize);
    runner
        .run(&prop::collection::vec(step(), 1..7), |steps| {
            let mut session = engine.create_session(&png).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for s in steps {
                let input = match &s {
                    Step::Words(w) => Utterance::Text(w.join(" ")),
                    Step::Empty => Utterance::Text(String::new()),
                    Step::FixtureAudio(i) => Utterance::Audio(fixtures[*i].clone()),
                };
                let before = exchanges(&session);
                let result = engine.chat(&mut session, &input, fps(16));
                requests.set(requests.get() + 1);
                let after = exchanges(&session);
                match result {
                    Ok(out) => {
                        let expected_words = match &s {
                            Step::Words(w) => w.len(),
                            _ => 2,
                        };
                        prop_assert!(expected_words >= 2);
                        prop_assert_eq!(&after.last().unwrap().1, &out.answer);
                    }
                    Err(_) => prop_assert_eq!(&before, &after),
                }
                prop_assert!(after.len() <= 2);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let mut failing = Config::default();
    failing.llm.backend = BackendKind::Http;
    failing.llm.endpoint = Some("http://127.0.0.1:9/v1/chat".into());
    let upstream = Engine::build(&failing, Arc::new(Profiler::new())).map_err(|e| e.to_string())?;
    let mut s = upstream.create_session(&png).map_err(|e| e.to_string())?;
    match upstream.chat(&mut s, &Utterance::Text("hello there".into()), fps(16)) {
        Err(Error::Upstream { .. }) => ensure(s.context().is_empty(), "context changed after upstream failure")?,
        other => return Err(format!("expected Upstream error, got {:?}", other.map(|o| o.answer))),
    }
    Ok(format!(
        "SilentInput at library, CLI exit 3, HTTP 422; context <= 2 over 50 sequences ({} requests)",
        requests.get()
    ))
}

fn warm_init() -> Outcome {
    let png = encode_png(&synthetic_avatar(BENCH_AVATAR_EDGE, BENCH_AVATAR_EDGE)).map_err(|e| e.to_string())?;
    let report = warm_cold(&Config::default(), &png, &Utterance::Text("hello there".into()), 5)
        .map_err(|e| e.to_string())?;
    print!("{}", report.to_text());
    let (cold, warm) = (report.cold.mean_s, report.warm.mean_s);
    ensure(cold > warm, format!("cold {cold:.4}s not above warm {warm:.4}s"))?;

    let server = start_server();
    ensure(!server.state.cell().is_initialized(), "engine initialized before first request")?;
    let barrier = Arc::new(Barrier::new(5));
    let handles: Vec<_> = (0..5)
        .map(|_| {
            let (barrier, base, png) = (Arc::clone(&barrier), server.base.clone(), png.clone());
            std::thread::spawn(move || {
                let agent = agent();
                barrier.wait();
                create_session(&agent, &base, &png)
            })
        })
        .collect();
    for h in handles {
        h.join().map_err(|_| "request thread panicked")??;
    }
    let count = server.state.cell().init_count();
    let mut resp = agent().get(format!("{}/healthz", server.base)).call().map_err(|e| e.to_string())?;
    let health: serde_json::Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
    ensure(count == 1 && health["init_count"] == 1, format!("initialized {count} times; health {health}"))?;
    Ok(format!(
        "cold {cold:.4}s > warm {warm:.4}s ({:.2}% reduction); 5 concurrent requests, 1 initialization",
        report.reduction_pct
    ))
}

fn absolute_runtimes() -> Outcome {
    let engine = engine();
    let clip = bench_clip(engine.tones());
    ensure(clip.sample_rate_hz() == CANONICAL_SAMPLE_RATE, "bench clip not at canonical rate")?;
    let base = reference::ABLATION[0];
    Ok(format!(
        "informational only; reference baseline {:.3}s and cold/warm {:.2}s/{:.2}s are inputs to the arithmetic check",
        base.1,
        reference::COLD.0,
        reference::WARM.0
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("reduction arithmetic", reduction_arithmetic),
        ("frame and blur-call accounting", frame_accounting),
        ("ablation direction", ablation_direction),
        ("fps sweep monotonicity", fps_monotonicity),
        ("fps selection", fps_selection),
        ("writer equivalence", writer_equivalence),
        ("determinism", determinism),
        ("pipeline semantics", pipeline_semantics),
        ("warm initialization", warm_init),
        ("absolute runtimes are reference only", absolute_runtimes),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {name} ({secs:.1}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name} ({secs:.1}s): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
