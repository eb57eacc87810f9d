//! Command implementations behind the `utalk` binary.
//!
//! Exit codes: 0 success, 2 configuration or format error, 3 input
//! validation failure, 4 upstream service failure, 1 anything else.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use utalk_core::bench::{
    fps_sweep, run_ablation, warm_cold, AblationPreset, BenchInput, BenchOptions,
    DEFAULT_REPETITIONS,
};
use utalk_core::codec::{decode_wav, encode_png, encode_wav};
use utalk_core::config::Config;
use utalk_core::fixtures::{bench_clip, synthetic_avatar, BENCH_AVATAR_EDGE, FIXTURE_PHRASES};
use utalk_core::orchestrator::{Engine, Utterance};
use utalk_core::profiler::Profiler;
use utalk_core::renderer::VideoFile;
use utalk_core::types::FrameRate;
use utalk_core::Error;

pub const DEFAULT_CONFIG: &str = "utalk.toml";

#[derive(Debug, Parser)]
#[command(name = "utalk", version, about = "Talking-avatar pipeline: serve, generate, benchmark, inspect")]
pub struct Cli {
    /// Configuration file; defaults to ./utalk.toml when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service until interrupted.
    Serve {
        /// Listen address, overriding the configuration.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Render one video from an image and text or audio.
    Generate(GenerateArgs),
    /// Time the renderer.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Print a video header and optionally export every frame as PNG.
    Inspect {
        #[arg(long)]
        video: PathBuf,
        #[arg(long)]
        dump_frames: Option<PathBuf>,
    },
    /// Write the procedural avatar and stub speech clips to a directory.
    Fixtures {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Speak the input itself.
    Content,
    /// Speak the language model's answer to the input.
    Chat,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, conflicts_with = "audio", required_unless_present = "audio")]
    pub text: Option<String>,
    #[arg(long)]
    pub audio: Option<PathBuf>,
    #[arg(long)]
    pub fps: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
    /// Render toggles of an ablation preset (baseline, mod1 .. mod4).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_enum, default_value_t = Mode::Content)]
    pub mode: Mode,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Time each cumulative optimisation preset on the 7 s clip.
    Ablation {
        #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
        runs: usize,
        /// Comma-separated subset of presets.
        #[arg(long)]
        presets: Option<String>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Time the fully optimised renderer across frame rates.
    Fps {
        #[arg(long, default_value_t = 16)]
        from: u32,
        #[arg(long, default_value_t = 25)]
        to: u32,
        #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
        runs: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Compare building the engine per request with reusing one.
    Warm {
        #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
        runs: usize,
    },
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

pub fn exit_code(err: &CliError) -> i32 {
    let CliError::Core(e) = err else { return 1 };
    match e {
        Error::Config(_)
        | Error::Format(_)
        | Error::ImageDecode(_)
        | Error::AudioDecode(_)
        | Error::InvalidFrameRate(_)
        | Error::TooFewSamples(_) => 2,
        Error::SilentInput { .. }
        | Error::EmptyText
        | Error::EmptyAudio
        | Error::NoFace { .. }
        | Error::UnknownFixture(_)
        | Error::BoxOutOfBounds { .. }
        | Error::NonPositiveBaseline(_)
        | Error::Precondition(_) => 3,
        Error::Upstream { .. } => 4,
        Error::WriteFailure(_) | Error::Busy(_) => 1,
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(path.to_owned(), e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Io(parent.to_owned(), e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Io(path.to_owned(), e))
}

/// File configuration (explicit path, else ./utalk.toml if present) with
/// environment overrides applied.
pub fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let mut config = match path {
        Some(p) => Config::load(p)?,
        None if Path::new(DEFAULT_CONFIG).exists() => Config::load(Path::new(DEFAULT_CONFIG))?,
        None => Config::default(),
    };
    config.apply_env()?;
    config.validate()?;
    Ok(config)
}

fn build_engine(config: &Config) -> Result<Engine, CliError> {
    Ok(Engine::build(config, Arc::new(Profiler::new()))?)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Serve { listen } => serve(config, listen),
        Command::Generate(args) => generate(config, args),
        Command::Bench(cmd) => bench(config, cmd),
        Command::Inspect { video, dump_frames } => inspect(&video, dump_frames.as_deref()),
        Command::Fixtures { out } => fixtures(&out),
    }
}

fn serve(mut config: Config, listen: Option<String>) -> Result<(), CliError> {
    if let Some(l) = listen {
        config.listen = l;
    }
    let state = Arc::new(utalk_service::AppState::new(config.clone())?);
    state.initialize()?;
    tracing::info!(init_count = state.cell().init_count(), "engine initialized");
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(PathBuf::from("runtime"), e))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&config.listen)
            .await
            .map_err(|e| CliError::Core(Error::Config(format!("cannot listen on {}: {e}", config.listen))))?;
        let addr = listener.local_addr().map_err(|e| CliError::Io(PathBuf::from(&config.listen), e))?;
        // Registered before the address is announced so an early SIGINT still shuts down cleanly.
        let interrupted = interrupt_signal().map_err(|e| CliError::Io(PathBuf::from("signal"), e))?;
        tracing::info!(%addr, "listening");
        println!("listening on http://{addr}");
        let shutdown = async move {
            interrupted.await;
            tracing::info!("shutting down");
        };
        utalk_service::serve(state, listener, shutdown)
            .await
            .map_err(|e| CliError::Io(PathBuf::from(addr.to_string()), e))
    })
}

#[cfg(unix)]
fn interrupt_signal() -> std::io::Result<impl std::future::Future<Output = ()> + Send> {
    use tokio::signal::unix::{signal, SignalKind};
    let mut sigint = signal(SignalKind::interrupt())?;
    let mut sigterm = signal(SignalKind::terminate())?;
    Ok(async move {
        tokio::select! {
            _ = sigint.recv() => {}
            _ = sigterm.recv() => {}
        }
    })
}

#[cfg(not(unix))]
fn interrupt_signal() -> std::io::Result<impl std::future::Future<Output = ()> + Send> {
    Ok(async {
        let _ = tokio::signal::ctrl_c().await;
    })
}

fn generate(mut config: Config, args: GenerateArgs) -> Result<(), CliError> {
    if let Some(name) = &args.preset {
        let preset: AblationPreset = name.parse()?;
        config.render = preset.config();
    }
    let fps = match args.fps {
        Some(n) => FrameRate::new(n)?,
        None => config.render.fps,
    };
    let input = match (&args.text, &args.audio) {
        (Some(t), _) => Utterance::Text(t.clone()),
        (None, Some(p)) => Utterance::Audio(decode_wav(&read(p)?)?),
        (None, None) => return Err(Error::Precondition("either --text or --audio is required".into()).into()),
    };
    let png = read(&args.image)?;
    let engine = build_engine(&config)?;
    let mut session = engine.create_session(&png)?;
    let video = match args.mode {
        Mode::Content => engine.content(&session, &input, fps)?.video,
        Mode::Chat => {
            let out = engine.chat(&mut session, &input, fps)?;
            println!("answer: {}", out.answer);
            out.video
        }
    };
    write(&args.out, video.bytes())?;
    let h = video.header();
    println!(
        "wrote {} ({}x{}, {} fps, {} frames, {} bytes)",
        args.out.display(),
        h.width,
        h.height,
        h.fps,
        h.frame_count,
        video.bytes().len()
    );
    Ok(())
}

fn save_report(out_dir: &Path, stem: &str, text: &str, json: String) -> Result<(), CliError> {
    write(&out_dir.join(format!("{stem}.txt")), text.as_bytes())?;
    write(&out_dir.join(format!("{stem}.json")), json.as_bytes())?;
    Ok(())
}

fn bench(config: Config, cmd: BenchCommand) -> Result<(), CliError> {
    let runs = match &cmd {
        BenchCommand::Ablation { runs, .. } | BenchCommand::Fps { runs, .. } | BenchCommand::Warm { runs } => *runs,
    };
    if runs < 2 {
        return Err(Error::TooFewSamples(runs).into());
    }
    let engine = build_engine(&config)?;
    let opts = BenchOptions::default().with_repetitions(runs);
    match cmd {
        BenchCommand::Ablation { presets, out_dir, .. } => {
            let presets = match presets {
                Some(list) => list.split(',').map(str::parse).collect::<Result<Vec<AblationPreset>, _>>()?,
                None => AblationPreset::ALL.to_vec(),
            };
            let input = BenchInput::standard(&engine)?;
            let report = run_ablation(&engine, &presets, &input, &opts)?;
            let text = report.to_text();
            print!("{text}");
            save_report(&out_dir, "bench_ablation", &text, serde_json::to_string_pretty(&report).expect("serializable"))
        }
        BenchCommand::Fps { from, to, out_dir, .. } => {
            if from > to {
                return Err(Error::Config(format!("--from {from} exceeds --to {to}")).into());
            }
            let list: Vec<u32> = (from..=to).collect();
            let input = BenchInput::standard(&engine)?;
            let report = fps_sweep(&engine, &list, &input, &opts)?;
            let text = report.to_text();
            print!("{text}");
            save_report(&out_dir, "bench_fps", &text, serde_json::to_string_pretty(&report).expect("serializable"))
        }
        BenchCommand::Warm { .. } => {
            drop(engine);
            let png = encode_png(&synthetic_avatar(BENCH_AVATAR_EDGE, BENCH_AVATAR_EDGE))?;
            let report = warm_cold(&config, &png, &Utterance::Text(FIXTURE_PHRASES[0].into()), runs)?;
            print!("{}", report.to_text());
            Ok(())
        }
    }
}

fn inspect(path: &Path, dump: Option<&Path>) -> Result<(), CliError> {
    let video = VideoFile::from_bytes(read(path)?)?;
    let h = video.header();
    println!("width: {}", h.width);
    println!("height: {}", h.height);
    println!("fps: {}", h.fps);
    println!("frame_count: {}", h.frame_count);
    println!("audio_sample_rate: {}", h.audio_sample_rate);
    println!("audio_sample_count: {}", h.audio_sample_count);
    println!("duration_s: {:.3}", h.audio_sample_count as f64 / h.audio_sample_rate as f64);
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_owned(), e))?;
        for i in 0..video.frame_count() {
            let frame = video.frame(i).expect("index below frame_count");
            write(&dir.join(format!("frame_{i:06}.png")), &encode_png(&frame)?)?;
        }
        println!("dumped {} frames to {}", video.frame_count(), dir.display());
    }
    Ok(())
}

fn fixtures(out: &Path) -> Result<(), CliError> {
    let tones = utalk_core::stages::ToneTable::new();
    write(&out.join("avatar.png"), &encode_png(&synthetic_avatar(BENCH_AVATAR_EDGE, BENCH_AVATAR_EDGE))?)?;
    write(&out.join("bench_clip.wav"), &encode_wav(&bench_clip(&tones))?)?;
    for phrase in FIXTURE_PHRASES {
        let name = format!("{}.wav", phrase.replace(' ', "_"));
        write(&out.join(name), &encode_wav(&tones.synthesize(phrase))?)?;
    }
    println!("wrote fixtures to {}", out.display());
    Ok(())
}
