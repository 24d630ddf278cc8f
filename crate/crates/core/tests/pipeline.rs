use hexwatch::gait::BodyPose;
use hexwatch::pipeline::{detect_sequence, regions_csv_rows, Detector, PipelineParams, REGIONS_CSV_HEADER};
use hexwatch::regions::MergeParams;
use hexwatch::scene::{generate_sequence, presets, SceneConfig, Trajectory};

fn render(cfg: &SceneConfig, n: usize) -> (Vec<hexwatch::imgproc::Frame>, hexwatch::scene::GroundTruth) {
    generate_sequence(cfg, &vec![BodyPose::default(); n]).unwrap()
}

#[test]
fn static_scene_has_no_regions() {
    let (frames, _) = render(&presets::empty(3), 6);
    for d in detect_sequence(&frames, PipelineParams::default()).unwrap() {
        assert!(d.compensated);
        assert!(d.regions.is_empty(), "frame {}: {:?}", d.frame, d.regions.len());
    }
}

#[test]
fn shaking_empty_scene_is_compensated() {
    let cfg = SceneConfig { jitter: 6.0, ..presets::empty(4) };
    let (frames, truth) = render(&cfg, 8);
    let dets = detect_sequence(&frames, PipelineParams::default()).unwrap();
    for (i, d) in dets.iter().enumerate() {
        let (s0, s1) = (truth.frames[i].shake, truth.frames[i + 1].shake);
        let (cx, cy) = d.transform.apply(320.0, 240.0);
        let err = (cx - 320.0 - (s1[0] - s0[0])).hypot(cy - 240.0 - (s1[1] - s0[1]));
        assert!(err < 0.5, "frame {}: {err}", d.frame);
        assert!(d.regions.is_empty(), "frame {}", d.frame);
    }
}

#[test]
fn rigid_mover_is_boxed() {
    let mut cfg = presets::simple(2);
    cfg.targets[0].rigidity = 0.0;
    cfg.targets[0].trajectory = Trajectory::Linear { start: [-100.0, 0.0], velocity: [6.0, 0.0] };
    let (frames, truth) = render(&cfg, 12);
    let dets = detect_sequence(&frames, PipelineParams::default()).unwrap();
    let mut good = 0;
    for d in &dets {
        let g = truth.frames[d.frame as usize].targets[0].bbox.unwrap();
        let best = d.boxes().map(|b| b.iou(&g)).fold(0.0, f64::max);
        if best >= 0.5 {
            good += 1;
        }
        // nothing far away from the target
        for b in d.boxes() {
            assert!(b.intersection(&g) > 0.0 || b.center().distance(&g.center()) < 60.0, "frame {}: {b:?}", d.frame);
        }
    }
    assert!(good >= dets.len() - 1, "{good}/{}", dets.len());
}

#[test]
fn merging_joins_two_part_target() {
    let (frames, _) = render(&presets::two_part_target(1), 16);
    let merged = detect_sequence(&frames, PipelineParams::default()).unwrap();
    let split = detect_sequence(&frames, PipelineParams { merge: MergeParams::disabled(), ..Default::default() }).unwrap();
    let ones = merged.iter().filter(|d| d.regions.len() == 1).count();
    let many = split.iter().filter(|d| d.regions.len() >= 2).count();
    assert!(ones >= 13, "{ones}");
    assert!(many >= 8, "{many}");
}

#[test]
fn csv_rows_follow_header() {
    let (frames, _) = render(&presets::two_part_target(5), 3);
    let mut det = Detector::new(PipelineParams::default()).unwrap();
    det.detect_step(&frames[0], &frames[1]).unwrap();
    let d = det.detect_step(&frames[1], &frames[2]).unwrap();
    let rows = regions_csv_rows(&d);
    let cols = REGIONS_CSV_HEADER.split(',').count();
    assert_eq!(rows.lines().count(), d.regions.len());
    for line in rows.lines() {
        assert_eq!(line.split(',').count(), cols);
        assert!(line.starts_with("2,"));
    }
}

#[test]
fn mismatched_frames_are_rejected() {
    let (a, _) = render(&presets::empty(1), 1);
    let small = hexwatch::imgproc::Frame::filled(32, 32, 1, [0, 0, 0]).unwrap();
    let mut det = Detector::new(PipelineParams::default()).unwrap();
    assert!(det.detect_step(&a[0], &small).is_err());
}
