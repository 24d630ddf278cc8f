//! End-to-end acceptance checks, run without the test harness so the report
//! is always printed. Checks run one after another (the throughput check
//! must not share the machine with other work), each prints a PASS/FAIL
//! line, and the process exits nonzero if any failed.

use futures::{SinkExt, StreamExt};
use hexwatch::control::{yaw_command, ControllerParams, MAX_TURN};
use hexwatch::features::MatchPair;
use hexwatch::gait::{normalize_angle, BodyPose, GaitMode, GaitParams, GaitState};
use hexwatch::imgproc::Frame;
use hexwatch::kcf::{init_track, update_track, KcfParams};
use hexwatch::motion::{adaptive_outlier_filter, FilterParams};
use hexwatch::pipeline::{detect_sequence, PipelineParams};
use hexwatch::rcp::{decode, encode, RcpCommand, MAX_OFFSET};
use hexwatch::regions::{motion_consistency, EquivalencePair, MergeParams, Region};
use hexwatch::scene::{generate_sequence, presets, render_frame, SceneConfig, Trajectory};
use hexwatch::{BoundingBox, Point};
use hexwatch_cli::{load_scene, run_bench, run_simulate, RunParams, ScenePreset, PURSUIT_TIMING};
use hexwatch_service::protocol::{ServerMessage, StatusPayload};
use hexwatch_service::Mode;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, BufReader, Read, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};
use tokio_tungstenite::tungstenite::Message;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn still(n: usize) -> Vec<BodyPose> {
    vec![BodyPose::default(); n]
}

fn yaw_deadband() -> Outcome {
    let p = ControllerParams::default();
    let y = yaw_command(320.0, &p);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut inside = (-80..=80).map(f64::from).collect::<Vec<_>>();
    inside.extend((0..10_000).map(|_| rng.gen_range(-80.0..=80.0)));
    let silent = inside.iter().all(|&d| yaw_command(d, &p) == 0.0);
    outcome((y - 0.5232).abs() <= 1e-9 && silent, format!("yaw(320) = {y:.12}, zero on |d| <= 80: {silent}"))
}

fn pair(motion: (f64, f64)) -> EquivalencePair {
    let r = Region::new(vec![(0, 0), (1, 0)], [0.0; 3]).unwrap();
    EquivalencePair { current: r.clone(), previous: r, current_index: 0, motion }
}

fn consistency_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let a: (f64, f64) = (rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let b: (f64, f64) = (rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let want = ((a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1)).sqrt();
        worst = worst.max((motion_consistency(&pair(a), &pair(b)) - want).abs());
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:.2e} over 10000 pairs"))
}

fn packed(c: &RcpCommand) -> [u8; 3] {
    let v = (u32::from(c.turn) << 23)
        | (u32::from(c.gimbal) << 22)
        | (u32::from(c.dx >= 0) << 21)
        | (u32::from(c.dx.unsigned_abs()) << 12)
        | (u32::from(c.dy >= 0) << 11)
        | (u32::from(c.dy.unsigned_abs()) << 2);
    [(v >> 16) as u8, (v >> 8) as u8, v as u8]
}

fn rcp_exhaustive() -> Outcome {
    let t0 = Instant::now();
    let (mut total, mut bad) = (0u64, 0u64);
    for turn in [false, true] {
        for gimbal in [false, true] {
            for dx in -MAX_OFFSET..=MAX_OFFSET {
                for dy in -MAX_OFFSET..=MAX_OFFSET {
                    let c = RcpCommand::new(turn, gimbal, dx, dy);
                    total += 1;
                    match encode(&c) {
                        Ok(b) if b == packed(&c) && decode(b) == Ok(c) => {}
                        _ => bad += 1,
                    }
                }
            }
        }
    }
    let worked = encode(&RcpCommand::new(true, true, 100, -50)).ok();
    let ok = bad == 0 && worked == Some([0xE6, 0x40, 0xC8]) && t0.elapsed() < Duration::from_secs(30);
    outcome(ok, format!("{total} commands, {bad} mismatches, worked frame {worked:02X?}, {:.1} s", t0.elapsed().as_secs_f64()))
}

fn compensation_trials() -> Outcome {
    let mut good = 0;
    let mut worst = 0.0f64;
    for trial in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let r = 10.0 * rng.gen::<f64>().sqrt();
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let t = (r * a.cos(), r * a.sin());
        let n = 160;
        let n_out = (n as f64 * rng.gen_range(0.2..=0.4)).round() as usize;
        let mut pairs = Vec::with_capacity(n);
        for _ in 0..n - n_out {
            let (x, y) = (rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0));
            let (nx, ny) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
            pairs.push(MatchPair::new(Point::new(x, y), Point::new(x + t.0 + nx, y + t.1 + ny)));
        }
        // foreground: a couple of independently moving blobs plus stray mismatches
        let blobs: Vec<((f64, f64), (f64, f64))> = (0..2)
            .map(|_| {
                let c = (rng.gen_range(60.0..580.0), rng.gen_range(60.0..420.0));
                let s = rng.gen_range(3.0..15.0);
                let d = rng.gen_range(0.0..std::f64::consts::TAU);
                (c, (t.0 + s * d.cos(), t.1 + s * d.sin()))
            })
            .collect();
        for i in 0..n_out {
            let (x, y) = (rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0));
            let p = if i % 5 == 4 {
                MatchPair::new(Point::new(x, y), Point::new(rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0)))
            } else {
                let ((cx, cy), v) = blobs[i % 2];
                let (px, py) = (cx + rng.gen_range(-40.0..40.0), cy + rng.gen_range(-40.0..40.0));
                MatchPair::new(Point::new(px, py), Point::new(px + v.0, py + v.1))
            };
            pairs.push(p);
        }
        let err = match adaptive_outlier_filter(&pairs, &FilterParams::default()) {
            Ok(f) => {
                let (x, y) = f.transform.apply(320.0, 240.0);
                (x - 320.0 - t.0).hypot(y - 240.0 - t.1)
            }
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(err);
        if err <= 0.5 {
            good += 1;
        }
    }
    outcome(good >= 190, format!("{good}/200 trials within 0.5 px (worst {worst:.3} px)"))
}

fn merging_completeness() -> Outcome {
    let (frames, _) = generate_sequence(&presets::two_part_target(11), &still(51)).unwrap();
    let merged = detect_sequence(&frames, PipelineParams::default()).unwrap();
    let split =
        detect_sequence(&frames, PipelineParams { merge: MergeParams::disabled(), ..Default::default() }).unwrap();
    let ones = merged.iter().filter(|d| d.regions.len() == 1).count();
    let many = split.iter().filter(|d| d.regions.len() >= 2).count();
    let n = merged.len();
    outcome(
        ones * 10 >= n * 9 && many * 2 >= n,
        format!("one region in {ones}/{n} frames with merging, >= 2 in {many}/{n} without"),
    )
}

fn on(b: &BoundingBox, truth: &BoundingBox) -> bool {
    truth.contains(b.center()) || b.iou(truth) >= 0.3
}

fn staged_detection() -> Outcome {
    let (frames, truth) = generate_sequence(&presets::staged_detection(21), &still(61)).unwrap();
    let dets = detect_sequence(&frames, PipelineParams::default()).unwrap();
    let (mut both, mut run, mut longest) = (0, 0, 0);
    for d in &dets {
        let t = &truth.frames[d.frame as usize];
        let movers: Vec<BoundingBox> = [1, 2].iter().filter_map(|&id| t.target(id).and_then(|g| g.bbox)).collect();
        if movers.len() == 2 && movers.iter().all(|m| d.boxes().any(|b| on(&b, m))) {
            both += 1;
        }
        let fig = t.target(3).and_then(|g| g.bbox).unwrap();
        let on_static = d.boxes().any(|b| on(&b, &fig) && !movers.iter().any(|m| on(&b, m)));
        run = if on_static { run + 1 } else { 0 };
        longest = longest.max(run);
    }
    let n = dets.len();
    outcome(
        both * 10 >= n * 9 && longest <= 3,
        format!("both movers boxed in {both}/{n} frames, longest static-figure run {longest}"),
    )
}

fn shifted(f: &Frame, sx: i64, sy: i64) -> Frame {
    let (w, h) = (i64::from(f.width()), i64::from(f.height()));
    let mut out = f.clone();
    for y in 0..h {
        for x in 0..w {
            let (u, v) = ((x - sx).clamp(0, w - 1), (y - sy).clamp(0, h - 1));
            out.put(x as u32, y as u32, f.get(u as u32, v as u32));
        }
    }
    out
}

fn kcf_tracking() -> Outcome {
    let cfg = SceneConfig {
        targets: vec![presets::figure(1, 20.0, Trajectory::Linear { start: [-150.0, 0.0], velocity: [3.0, 0.0] }, 0.0)],
        ..presets::empty(31)
    };
    let (frames, truth) = generate_sequence(&cfg, &still(101)).unwrap();
    let truth_box = |i: usize| truth.frames[i].target(1).unwrap().bbox.unwrap();
    let mut state = init_track(&frames[0], truth_box(0), KcfParams::default()).unwrap();
    let mut total = 0.0;
    for (i, f) in frames.iter().enumerate().skip(1) {
        let r = update_track(&mut state, f).unwrap();
        total += r.bbox.center().distance(&truth_box(i).center());
    }
    let mean = total / 100.0;

    let base = &frames[0];
    let mut worst = 0.0f64;
    for (sx, sy) in [(3, 0), (-5, 2), (0, -7), (8, 8), (-10, -4)] {
        let mut s = init_track(base, truth_box(0), KcfParams::default()).unwrap();
        let r = update_track(&mut s, &shifted(base, sx, sy)).unwrap();
        let c0 = truth_box(0).center();
        let c = r.bbox.center();
        worst = worst.max((c.x - c0.x - sx as f64).abs().max((c.y - c0.y - sy as f64).abs()));
    }
    outcome(mean <= 2.0 && worst <= 1.0, format!("mean center error {mean:.2} px, worst shift error {worst:.2} px"))
}

fn closed_loop() -> Outcome {
    let (move_at, reverse_at, stop_at) = PURSUIT_TIMING;
    let cfg = ScenePreset::Pursuit.scene(1);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let (_, samples) = run_simulate(&cfg, 1, 420, &RunParams::default(), &out, false).unwrap();
    let csv = std::fs::read_to_string(out.join("offsets.csv")).unwrap();

    let p = ControllerParams::default();
    // frames allowed to reach the band from offset d with a still target
    let bound_from = |d: f64| (((d.abs() - p.th).max(0.0) * p.k_yaw / MAX_TURN).ceil() as u64 + 2) * 6;
    let dx0 = samples[0].truth.unwrap().0;
    let bound = bound_from(dx0);
    let dx = |s: &hexwatch_cli::OffsetSample| s.offset.map(|o| o.0);
    let entered = samples.iter().find(|s| dx(s).is_some_and(|d| d.abs() <= p.th)).map(|s| s.frame);
    let held = entered.is_some_and(|e| {
        samples.iter().filter(|s| s.frame >= e && s.frame <= reverse_at).all(|s| dx(s).is_some_and(|d| d.abs() <= p.th))
    });
    let flipped = samples.iter().find(|s| s.frame > reverse_at && dx(s).is_some_and(|d| d < 0.0)).map(|s| s.frame);
    let chase = samples
        .iter()
        .filter(|s| s.frame > reverse_at && s.frame <= stop_at)
        .filter_map(dx)
        .fold(0.0f64, |m, d| m.max(d.abs()));
    let at_stop = samples.iter().find(|s| s.frame == stop_at).and_then(dx).unwrap_or(f64::INFINITY);
    let settle_bound = bound_from(at_stop);
    let reconverged = samples
        .iter()
        .filter(|s| s.frame > stop_at + settle_bound)
        .all(|s| dx(s).is_some_and(|d| d.abs() <= p.th));
    let rows = csv.lines().count() == samples.len() + 1;
    let ok = entered.is_some_and(|e| e <= bound) && held && flipped.is_some() && reconverged && rows;
    outcome(
        ok,
        format!(
            "dx0 {dx0:.0}: band entered at frame {entered:?} (bound {bound}), held until reversal at {reverse_at}: {held}, \
             sign change at {flipped:?}, max |dx| while chasing {chase:.0}, back in band within {settle_bound} frames of the stop at {stop_at}: {reconverged} \
             (target still until {move_at})"
        ),
    )
}

#[derive(Debug, Clone)]
enum Op {
    Step(u8),
    Walk(u32),
    Turn(f64),
    Stop,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        6 => (1u8..13).prop_map(Op::Step),
        2 => (1u32..4).prop_map(Op::Walk),
        2 => (-1.0..1.0f64).prop_map(Op::Turn),
        1 => Just(Op::Stop),
    ]
}

/// Runs one command sequence, checking every step against the invariants and
/// every finished cycle against the closed-form pose.
fn gait_sequence(start: (f64, f64, f64), ops: &[Op]) -> Result<(), TestCaseError> {
    let params = GaitParams::default();
    let mut s = GaitState::idle();
    let mut p = BodyPose::new(start.0, start.1, start.2);
    // closed form: x = xs + n * stride * cos(heading) over straight cycles at a fixed heading
    let (mut xs, mut ys, mut heading, mut n) = (p.x, p.y, p.heading, 0u32);
    let mut cycle = GaitMode::Idle;
    let mut cycle_turn = 0.0;
    let mut support = [0u32; 6];
    for op in ops {
        match *op {
            Op::Walk(c) => s = s.walk(c),
            Op::Turn(t) => s = s.begin_turn(t),
            Op::Stop => s = s.stop(),
            Op::Step(k) => {
                for _ in 0..k {
                    if s.phase == 0 {
                        cycle = s.mode;
                        cycle_turn = s.pending_turn.clamp(-params.max_turn_per_cycle, params.max_turn_per_cycle);
                        support = [0; 6];
                    }
                    let (ns, np, _) = s.step(&p, &params);
                    prop_assert!(ns.stance.len() >= 3, "stance {:?}", ns.stance);
                    for leg in ns.stance.iter() {
                        support[leg.index()] += 1;
                    }
                    s = ns;
                    p = np;
                    if s.phase == 0 && cycle != GaitMode::Idle {
                        prop_assert!(support.iter().all(|&c| c == 3), "duty {support:?}");
                        if cycle == GaitMode::Straight {
                            n += 1;
                        } else {
                            xs += f64::from(n) * params.stride * heading.cos();
                            ys += f64::from(n) * params.stride * heading.sin();
                            n = 0;
                            heading = normalize_angle(heading + cycle_turn);
                        }
                        let ex = xs + f64::from(n) * params.stride * heading.cos();
                        let ey = ys + f64::from(n) * params.stride * heading.sin();
                        prop_assert!((p.x - ex).abs() <= 1e-12 && (p.y - ey).abs() <= 1e-12, "{p:?} vs ({ex}, {ey})");
                        prop_assert!(normalize_angle(p.heading - heading).abs() <= 1e-12, "{} vs {heading}", p.heading);
                        cycle = GaitMode::Idle;
                    }
                }
            }
        }
    }
    Ok(())
}

fn gait_invariants() -> Outcome {
    let t0 = Instant::now();
    let mut runner = TestRunner::new(Config { cases: 10_000, failure_persistence: None, ..Config::default() });
    let strategy = ((-5.0..5.0f64, -5.0..5.0f64, -3.0..3.0f64), prop::collection::vec(op(), 1..40));
    let r = runner.run(&strategy, |(start, ops)| gait_sequence(start, &ops));
    let elapsed = t0.elapsed().as_secs_f64();
    match r {
        Ok(()) => outcome(elapsed < 30.0, format!("10000 sequences, {elapsed:.1} s")),
        Err(e) => outcome(false, format!("{e}")),
    }
}

fn throughput_ordering() -> Outcome {
    match run_bench(30, 7, &RunParams::default()) {
        Ok(r) => outcome(
            r.detect_simple_faster() && r.track_faster_than_detect() && r.track_gap_smaller(),
            r.summary().replace('\n', "; "),
        ),
        Err(e) => outcome(false, format!("{e:#}")),
    }
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

async fn next_message(ws: &mut Ws, mut pred: impl FnMut(&ServerMessage) -> bool) -> Result<ServerMessage, String> {
    let fut = async {
        while let Some(m) = ws.next().await {
            if let Ok(Message::Text(t)) = m {
                let m: ServerMessage = serde_json::from_str(&t).map_err(|e| e.to_string())?;
                if pred(&m) {
                    return Ok(m);
                }
            }
        }
        Err("socket closed".to_string())
    };
    tokio::time::timeout(Duration::from_secs(30), fut).await.map_err(|_| "timed out".to_string())?
}

fn status_of(m: &ServerMessage) -> Option<&StatusPayload> {
    match m {
        ServerMessage::Status(s) => Some(s),
        _ => None,
    }
}

fn http_status(addr: &str) -> Result<StatusPayload, String> {
    let mut tcp = std::net::TcpStream::connect(addr).map_err(|e| e.to_string())?;
    tcp.write_all(b"GET /status HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").map_err(|e| e.to_string())?;
    let mut buf = String::new();
    tcp.read_to_string(&mut buf).map_err(|e| e.to_string())?;
    let body = buf.split_once("\r\n\r\n").map(|(_, b)| b).ok_or("no body")?;
    serde_json::from_str(body).map_err(|e| e.to_string())
}

async fn scripted_client(addr: &str, bbox: BoundingBox) -> Result<String, String> {
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.map_err(|e| e.to_string())?;
    let send = |text: String| Message::Text(text.into());
    next_message(&mut ws, |m| matches!(m, ServerMessage::Frame(_))).await?;

    ws.send(send(serde_json::json!({"kind": "SELECT_TARGET", "bbox": bbox}).to_string())).await.map_err(|e| e.to_string())?;
    let s = next_message(&mut ws, |m| status_of(m).is_some_and(|s| s.mode == Mode::Tracking && s.rcp_frames >= 3)).await?;
    let tracking_frame = status_of(&s).unwrap().frame;

    ws.send(send("{\"kind\": \"SELECT_TARGET\", \"bbox\": ".into())).await.map_err(|e| e.to_string())?;
    let err = next_message(&mut ws, |m| matches!(m, ServerMessage::Error { .. })).await?;
    let s = next_message(&mut ws, |m| status_of(m).is_some()).await?;
    if status_of(&s).unwrap().mode != Mode::Tracking {
        return Err(format!("malformed message disturbed the session: {s:?}"));
    }

    ws.send(send(r#"{"kind":"SET_MODE","mode":"manual"}"#.into())).await.map_err(|e| e.to_string())?;
    let s = next_message(&mut ws, |m| status_of(m).is_some_and(|s| s.mode == Mode::Manual)).await?;
    let (manual_frame, sent) = (status_of(&s).unwrap().frame, status_of(&s).unwrap().rcp_frames);
    ws.send(send(r#"{"kind":"MANUAL_CMD","direction":"left"}"#.into())).await.map_err(|e| e.to_string())?;
    let s = next_message(&mut ws, |m| status_of(m).is_some_and(|s| s.frame >= manual_frame + 30)).await?;
    let after = status_of(&s).unwrap().rcp_frames;
    let snap = http_status(addr)?;
    if after != sent || snap.rcp_frames != sent || snap.mode != Mode::Manual {
        return Err(format!("RCP frames went from {sent} to {after} (GET /status {}) in manual mode", snap.rcp_frames));
    }
    let ServerMessage::Error { message } = err else { unreachable!() };
    Ok(format!(
        "tracking with controller output by frame {tracking_frame}, malformed -> ERROR \"{message}\", {sent} RCP frames before manual and {after} after 30 manual frames"
    ))
}

fn headless_service() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let rcp = dir.path().join("rcp.bin");
    let child = Command::new(env!("CARGO_BIN_EXE_hexwatch"))
        .args(["serve", "--preset", "pursuit", "--seed", "3", "--bind", "127.0.0.1:0", "--rate", "30", "--rcp-log"])
        .arg(&rcp)
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut server = Server(child);
    let mut line = String::new();
    BufReader::new(server.0.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let Some(addr) = line.split("http://").nth(1).and_then(|r| r.split_whitespace().next()).map(str::to_string) else {
        return outcome(false, format!("no listen address in {line:?}"));
    };

    let cfg = load_scene(None, ScenePreset::Pursuit, Some(3)).unwrap();
    let (_, truth) = render_frame(&cfg, &BodyPose::default(), 0.0, 0);
    let bbox = truth.target(1).unwrap().bbox.unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let result = rt.block_on(scripted_client(&addr, bbox));

    // graceful stop flushes the RCP log; every logged frame is a length byte plus three
    let _ = Command::new("kill").args(["-INT", &server.0.id().to_string()]).status();
    let deadline = Instant::now() + Duration::from_secs(10);
    while server.0.try_wait().ok().flatten().is_none() && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(50));
    }
    let logged = std::fs::metadata(&rcp).map(|m| m.len() / 4).unwrap_or(0);
    let elapsed = t0.elapsed().as_secs_f64();
    match result {
        Ok(detail) => outcome(logged > 0 && elapsed < 60.0, format!("{detail}; {logged} frames in the RCP log, {elapsed:.1} s")),
        Err(e) => outcome(false, e),
    }
}

fn main() {
    type Check = (&'static str, fn() -> Outcome);
    let checks: [Check; 11] = [
        ("yaw law and deadband", yaw_deadband),
        ("motion consistency vs direct arithmetic", consistency_oracle),
        ("RCP exhaustive roundtrip and worked frame", rcp_exhaustive),
        ("motion compensation under foreground outliers", compensation_trials),
        ("region merging completeness", merging_completeness),
        ("two movers and a static figure under jitter", staged_detection),
        ("KCF tracking and shift recovery", kcf_tracking),
        ("closed loop convergence and reversal", closed_loop),
        ("gait invariants", gait_invariants),
        ("throughput ordering", throughput_ordering),
        ("headless service with scripted client", headless_service),
    ];
    let mut failed = vec![];
    for (i, (name, run)) in checks.iter().enumerate() {
        let o = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        println!("check {:>2} {}: {} ({})", i + 1, if o.pass { "PASS" } else { "FAIL" }, name, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed checks: {failed:?}");
        std::process::exit(1);
    }
}
