use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hexwatch_cli::{load_scene, run_bench, run_detect, run_simulate, run_track, DetectInput, RunParams, ScenePreset};
use hexwatch_service::server::ServeOptions;
use hexwatch_service::{serve, ImageMode, SessionConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hexwatch", version, about = "Moving-camera detection, tracking and closed-loop simulation for a hexapod robot")]
struct Cli {
    /// Worker threads for frame rendering.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SceneArgs {
    /// Scene configuration (JSON). Overrides --preset.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "staged")]
    preset: ScenePreset,
    #[arg(long)]
    seed: Option<u64>,
    /// Parameter overrides (JSON with optional pipeline, controller, kcf sections).
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect moving regions in a rendered scene or a directory of frames.
    Detect {
        #[command(flatten)]
        scene: SceneArgs,
        /// Read frames from this directory instead of rendering a scene.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track one target with a fixed camera.
    Track {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value_t = 1)]
        target: u32,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the closed loop headless and write offset and pose traces.
    Simulate {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value_t = 1)]
        target: u32,
        #[arg(long, default_value_t = 420)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also draw offsets.png.
        #[arg(long)]
        plot: bool,
    },
    /// Compare detection and tracking throughput on the simple and complex presets.
    Bench {
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Serve /ws and /status for operator consoles.
    Serve {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Ticks per second.
        #[arg(long, default_value_t = 10.0)]
        rate: f64,
        #[arg(long, value_enum, default_value = "inline")]
        images: Images,
        /// Directory for numbered frames when --images=files.
        #[arg(long)]
        image_dir: Option<PathBuf>,
        #[arg(long)]
        event_log: Option<PathBuf>,
        #[arg(long)]
        rcp_log: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Images {
    None,
    Inline,
    Files,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Detect { scene, input, frames, out } => {
            let params = RunParams::load(scene.params.as_deref())?;
            let source = match input {
                Some(dir) => DetectInput::Directory(dir),
                None => DetectInput::Scene(load_scene(scene.scene.as_deref(), scene.preset, scene.seed)?),
            };
            let report = run_detect(&source, frames, &params.pipeline, &out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Track { scene, target, frames, out } => {
            let params = RunParams::load(scene.params.as_deref())?;
            let cfg = load_scene(scene.scene.as_deref(), scene.preset, scene.seed)?;
            let report = run_track(&cfg, target, frames, &params.kcf, &out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Simulate { scene, target, frames, out, plot } => {
            let params = RunParams::load(scene.params.as_deref())?;
            let preset = if scene.scene.is_none() && scene.preset == ScenePreset::Staged { ScenePreset::Pursuit } else { scene.preset };
            let cfg = load_scene(scene.scene.as_deref(), preset, scene.seed)?;
            let (report, _) = run_simulate(&cfg, target, frames, &params, &out, plot)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Bench { frames, seed, params } => {
            let params = RunParams::load(params.as_deref())?;
            let report = run_bench(frames, seed, &params)?;
            println!("{}", report.summary());
            if !report.track_faster_than_detect() {
                bail!("tracking was not faster than detection");
            }
        }
        Command::Serve { scene, bind, rate, images, image_dir, event_log, rcp_log } => {
            let params = RunParams::load(scene.params.as_deref())?;
            let cfg = load_scene(scene.scene.as_deref(), scene.preset, scene.seed)?;
            let mut sc = SessionConfig::new(cfg);
            sc.pipeline = params.pipeline;
            sc.controller = params.controller;
            sc.kcf = params.kcf;
            sc.images = match images {
                Images::None => ImageMode::None,
                Images::Inline => ImageMode::Inline,
                Images::Files => {
                    let dir = image_dir.context("--images files needs --image-dir")?;
                    std::fs::create_dir_all(&dir)?;
                    ImageMode::Directory(dir)
                }
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let server = serve(&bind, sc, ServeOptions { rate, event_log, rcp_log }).await?;
                eprintln!("listening on http://{} (GET /status, /ws)", server.local_addr());
                tokio::signal::ctrl_c().await?;
                server.shutdown().await;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}
