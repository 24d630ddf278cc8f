//! Batch and headless entry points behind the `hexwatch` binary.

pub mod output;
pub mod plot;

use anyhow::{bail, ensure, Context, Result};
use hexwatch::control::ControllerParams;
use hexwatch::gait::BodyPose;
use hexwatch::imgproc::{read_frame, write_frame, Frame};
use hexwatch::kcf::{init_track, track_csv_row, update_track, KcfParams, TRACK_CSV_HEADER};
use hexwatch::pipeline::{annotate, regions_csv_rows, Detector, PipelineParams, REGIONS_CSV_HEADER};
use hexwatch::scene::{generate_sequence, presets, GroundTruth, SceneConfig};
use hexwatch_service::{OperatorMessage, Session, SessionConfig};
use output::Staging;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Named scenes shipped with the tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenePreset {
    Empty,
    Simple,
    Complex,
    /// Two walkers and a static figure under camera shake.
    Staged,
    /// One target built from two same-colored parts.
    TwoPart,
    /// A figure that waits, walks away, turns back and stops.
    Pursuit,
}

/// Frame indices of the pursuit preset's move, reversal and stop.
pub const PURSUIT_TIMING: (u64, u64, u64) = (120, 250, 350);

impl ScenePreset {
    pub fn scene(self, seed: u64) -> SceneConfig {
        match self {
            ScenePreset::Empty => presets::empty(seed),
            ScenePreset::Simple => presets::simple(seed),
            ScenePreset::Complex => presets::complex(seed),
            ScenePreset::Staged => presets::staged_detection(seed),
            ScenePreset::TwoPart => presets::two_part_target(seed),
            ScenePreset::Pursuit => {
                let (a, r, s) = PURSUIT_TIMING;
                presets::pursuit(seed, a, r, s)
            }
        }
    }
}

/// Scene from a JSON file if given, else the preset. `seed` overrides the
/// file's seed when present.
pub fn load_scene(file: Option<&Path>, preset: ScenePreset, seed: Option<u64>) -> Result<SceneConfig> {
    match file {
        Some(p) => {
            let mut cfg = SceneConfig::load(p).with_context(|| format!("loading scene {}", p.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            Ok(cfg)
        }
        None => Ok(preset.scene(seed.unwrap_or(1))),
    }
}

/// Contents of a `--params` file. Every section is optional.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub pipeline: PipelineParams,
    pub controller: ControllerParams,
    pub kcf: KcfParams,
}

impl RunParams {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(p) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let params: RunParams = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        params.pipeline.validate()?;
        params.controller.validate().map_err(anyhow::Error::msg)?;
        params.kcf.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timing {
    pub detect_ms: f64,
    pub track_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub frames: usize,
    pub timing: Timing,
    /// Frames per second over the total time.
    pub fps: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunReport {
    fn finish(&mut self, started: Instant) {
        self.timing.total_ms = started.elapsed().as_secs_f64() * 1000.0;
        self.fps = if self.timing.total_ms > 0.0 { self.frames as f64 / (self.timing.total_ms / 1000.0) } else { 0.0 };
    }
}

/// Where `detect` reads frames from.
#[derive(Debug, Clone)]
pub enum DetectInput {
    Scene(SceneConfig),
    /// Directory of `.png` / `.ppm` frames, processed in file-name order.
    Directory(PathBuf),
}

fn static_sequence(cfg: &SceneConfig, frames: usize) -> Result<(Vec<Frame>, GroundTruth)> {
    ensure!(frames >= 2, "need at least 2 frames, got {frames}");
    Ok(generate_sequence(cfg, &vec![BodyPose::default(); frames])?)
}

fn read_directory(dir: &Path, limit: usize) -> Result<Vec<Frame>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading input directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("png" | "ppm" | "pnm")))
        .collect();
    paths.sort();
    paths.truncate(limit);
    ensure!(paths.len() >= 2, "{} holds fewer than 2 frames", dir.display());
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| read_frame(p, i as u64).with_context(|| format!("reading {}", p.display())))
        .collect()
}

/// Detect moving regions in every frame after the first. Writes
/// `regions.csv`, `annotated_NNNNN.png` per frame and `report.json`, plus
/// `ground_truth.csv` for rendered scenes.
pub fn run_detect(input: &DetectInput, frames: usize, params: &PipelineParams, out: &Path) -> Result<RunReport> {
    let started = Instant::now();
    let (seq, truth) = match input {
        DetectInput::Scene(cfg) => {
            let (f, t) = static_sequence(cfg, frames)?;
            (f, Some(t))
        }
        DetectInput::Directory(dir) => (read_directory(dir, frames)?, None),
    };
    let stage = Staging::new(out)?;
    let mut detector = Detector::new(*params)?;
    let mut report = RunReport::default();
    let mut csv = format!("{REGIONS_CSV_HEADER}\n");
    for w in seq.windows(2) {
        let t0 = Instant::now();
        let d = detector.detect_step(&w[0], &w[1])?;
        report.timing.detect_ms += t0.elapsed().as_secs_f64() * 1000.0;
        csv.push_str(&regions_csv_rows(&d));
        let name = format!("annotated_{:05}.png", d.frame);
        write_frame(&annotate(&w[1], &d), stage.path(&name))?;
        report.frames += 1;
    }
    report.outputs.push(stage.write("regions.csv", csv)?);
    if let Some(t) = truth {
        report.outputs.push(stage.write("ground_truth.csv", t.to_csv())?);
    }
    report.finish(started);
    report.outputs.push(stage.final_path("report.json"));
    stage.write("report.json", serde_json::to_string_pretty(&report)?)?;
    stage.commit()?;
    Ok(report)
}

/// Track `target` with a fixed camera, starting from its true box in frame 0.
/// Writes `track.csv` and `report.json`.
pub fn run_track(cfg: &SceneConfig, target: u32, frames: usize, kcf: &KcfParams, out: &Path) -> Result<RunReport> {
    let started = Instant::now();
    cfg.target(target)?;
    let (seq, truth) = static_sequence(cfg, frames)?;
    let Some(bbox) = truth.frames[0].target(target).and_then(|t| t.bbox) else {
        bail!("target {target} is not visible in frame 0");
    };
    let stage = Staging::new(out)?;
    let mut report = RunReport::default();
    let mut state = init_track(&seq[0], bbox, *kcf)?;
    let mut csv = format!("{TRACK_CSV_HEADER}\n");
    for f in &seq[1..] {
        let t0 = Instant::now();
        let r = update_track(&mut state, f)?;
        report.timing.track_ms += t0.elapsed().as_secs_f64() * 1000.0;
        csv.push_str(&track_csv_row(f.index(), &r));
        csv.push('\n');
        report.frames += 1;
    }
    report.outputs.push(stage.write("track.csv", csv)?);
    report.finish(started);
    report.outputs.push(stage.final_path("report.json"));
    stage.write("report.json", serde_json::to_string_pretty(&report)?)?;
    stage.commit()?;
    Ok(report)
}

pub const OFFSET_CSV_HEADER: &str = "frame,dx,dy,truth_dx,truth_dy";
pub const SIM_POSE_CSV_HEADER: &str = "frame,x,y,theta,pitch,phase,stance";

/// One row of the offset trace. Tracker offsets are blank when not tracking;
/// truth offsets are blank when the target is out of view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetSample {
    pub frame: u64,
    pub offset: Option<(f64, f64)>,
    pub truth: Option<(f64, f64)>,
}

/// Closed-loop run: select `target` by its true box in frame 0, then let the
/// controller steer for the remaining frames. Writes `offsets.csv`,
/// `pose.csv`, `rcp.bin`, `events.jsonl`, `report.json` and optionally
/// `offsets.png`.
pub fn run_simulate(
    cfg: &SceneConfig,
    target: u32,
    frames: usize,
    params: &RunParams,
    out: &Path,
    plot: bool,
) -> Result<(RunReport, Vec<OffsetSample>)> {
    let started = Instant::now();
    ensure!(frames >= 2, "need at least 2 frames, got {frames}");
    cfg.target(target)?;
    let stage = Staging::new(out)?;
    let mut sc = SessionConfig::new(cfg.clone());
    sc.pipeline = params.pipeline;
    sc.controller = params.controller;
    sc.kcf = params.kcf;
    let mut session = Session::new(sc)?;
    session.set_rcp_sink(Box::new(std::fs::File::create(stage.path("rcp.bin"))?));
    session.set_event_log(Box::new(std::io::BufWriter::new(std::fs::File::create(stage.path("events.jsonl"))?)));

    let (cx, cy) = (f64::from(cfg.camera.width) / 2.0, f64::from(cfg.camera.height) / 2.0);
    let mut samples = Vec::with_capacity(frames);
    let mut offsets = format!("{OFFSET_CSV_HEADER}\n");
    let mut poses = format!("{SIM_POSE_CSV_HEADER}\n");
    let mut report = RunReport::default();
    for i in 0..frames {
        let t0 = Instant::now();
        let tick = session.tick();
        report.timing.track_ms += t0.elapsed().as_secs_f64() * 1000.0;
        if i == 0 {
            let Some(bbox) = tick.truth.target(target).and_then(|t| t.bbox) else {
                bail!("target {target} is not visible in frame 0");
            };
            session.handle_message(OperatorMessage::SelectTarget { bbox })?;
        }
        let truth = tick.truth.target(target).and_then(|t| t.bbox).map(|b| {
            let c = b.center();
            (c.x - cx, c.y - cy)
        });
        let s = OffsetSample { frame: tick.frame, offset: tick.offset.map(|o| (o.dx, o.dy)), truth };
        let cell = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_default();
        let _ = writeln!(
            offsets,
            "{},{},{},{},{}",
            s.frame,
            cell(s.offset.map(|o| o.0)),
            cell(s.offset.map(|o| o.1)),
            cell(s.truth.map(|o| o.0)),
            cell(s.truth.map(|o| o.1))
        );
        let (p, g) = (session.pose(), session.gait());
        let _ = writeln!(
            poses,
            "{},{:.6},{:.6},{:.6},{:.6},{},{}",
            tick.frame,
            p.x,
            p.y,
            p.heading,
            session.pitch(),
            g.phase,
            g.stance.bits()
        );
        samples.push(s);
        report.frames += 1;
    }
    drop(session);
    report.outputs.push(stage.final_path("rcp.bin"));
    report.outputs.push(stage.final_path("events.jsonl"));
    report.outputs.push(stage.write("offsets.csv", offsets)?);
    report.outputs.push(stage.write("pose.csv", poses)?);
    if plot {
        let pts: Vec<_> = samples.iter().map(|s| (s.frame, s.offset.map(|o| o.0), s.offset.map(|o| o.1))).collect();
        write_frame(&plot::offset_chart(&pts, params.controller.th), stage.path("offsets.png"))?;
        report.outputs.push(stage.final_path("offsets.png"));
    }
    report.finish(started);
    report.outputs.push(stage.final_path("report.json"));
    stage.write("report.json", serde_json::to_string_pretty(&report)?)?;
    stage.commit()?;
    Ok((report, samples))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetBench {
    pub preset: ScenePreset,
    pub frames: usize,
    pub detect_fps: f64,
    pub track_fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub simple: PresetBench,
    pub complex: PresetBench,
}

impl BenchReport {
    pub fn detect_simple_faster(&self) -> bool {
        self.simple.detect_fps > self.complex.detect_fps
    }

    pub fn track_faster_than_detect(&self) -> bool {
        self.simple.track_fps > self.simple.detect_fps && self.complex.track_fps > self.complex.detect_fps
    }

    /// Compares the gaps as relative (log-ratio) differences, since tracking
    /// runs an order of magnitude faster than detection.
    pub fn track_gap_smaller(&self) -> bool {
        let gap = |a: f64, b: f64| (a / b).ln().abs();
        gap(self.simple.track_fps, self.complex.track_fps) < gap(self.simple.detect_fps, self.complex.detect_fps)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for p in [&self.simple, &self.complex] {
            let _ = writeln!(s, "{:?}: detect {:.1} fps, track {:.1} fps over {} frames", p.preset, p.detect_fps, p.track_fps, p.frames);
        }
        let _ = writeln!(s, "detect simple > complex: {}", self.detect_simple_faster());
        let _ = writeln!(s, "track > detect in both: {}", self.track_faster_than_detect());
        let _ = write!(s, "track gap < detect gap: {}", self.track_gap_smaller());
        s
    }
}

/// Each stage is timed this many times; the fastest run counts.
pub const BENCH_REPEATS: usize = 3;

/// Time detection and tracking separately on the simple and complex presets.
/// Rendering is excluded. Tracking follows target 1 from its true box.
pub fn run_bench(frames: usize, seed: u64, params: &RunParams) -> Result<BenchReport> {
    ensure!(frames >= 10, "bench needs at least 10 frames, got {frames}");
    let one = |preset: ScenePreset| -> Result<PresetBench> {
        let cfg = preset.scene(seed);
        let (seq, truth) = static_sequence(&cfg, frames)?;
        let bbox = truth.frames[0].target(1).and_then(|t| t.bbox).context("target 1 not visible")?;
        let (mut detect_s, mut track_s) = (f64::INFINITY, f64::INFINITY);
        for _ in 0..BENCH_REPEATS {
            let mut detector = Detector::new(params.pipeline)?;
            let t0 = Instant::now();
            for w in seq.windows(2) {
                detector.detect_step(&w[0], &w[1])?;
            }
            detect_s = detect_s.min(t0.elapsed().as_secs_f64());
            let mut state = init_track(&seq[0], bbox, params.kcf)?;
            let t0 = Instant::now();
            for f in &seq[1..] {
                update_track(&mut state, f)?;
            }
            track_s = track_s.min(t0.elapsed().as_secs_f64());
        }
        let n = (frames - 1) as f64;
        Ok(PresetBench { preset, frames, detect_fps: n / detect_s, track_fps: n / track_s })
    };
    Ok(BenchReport { simple: one(ScenePreset::Simple)?, complex: one(ScenePreset::Complex)? })
}
