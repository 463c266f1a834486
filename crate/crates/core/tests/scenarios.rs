use std::process::Command;

use ffmap::config::Config;
use ffmap::geometry::{Label, Pose};
use ffmap::labeling::DoorKind;
use ffmap::oracle::{simulate_frame, DoorSpec, SceneSpec, SensorSpec, WallSegment};
use ffmap::pipeline::classify_frame;

fn wall(x0: f64, y0: f64, x1: f64, y1: f64) -> WallSegment {
    WallSegment {
        start: (x0, y0),
        end: (x1, y1),
        height: 2.7,
        thickness: 0.1,
    }
}

fn corridor() -> SceneSpec {
    SceneSpec {
        walls: vec![wall(0.0, 0.0, 10.0, 0.0), wall(10.0, 0.0, 10.0, 2.0), wall(10.0, 2.0, 0.0, 2.0)],
        doors: Vec::new(),
        furniture: Vec::new(),
        ceiling_height: 2.7,
    }
}

#[test]
fn corridor_end_gives_three_walls() {
    // Facing the end wall at an angle; head-on, its rings meet it as circles.
    let yaw = 20f64.to_radians();
    let pose = Pose::planar(9.7, 1.0, yaw, 0.0);
    let frame = simulate_frame(&corridor(), &SensorSpec::default(), &pose, 3).unwrap();
    let r = classify_frame(&frame.scan, &Config::default(), 1).unwrap();
    let world: Vec<(f64, f64)> = r
        .walls
        .iter()
        .map(|w| {
            let n = pose.rotate(&w.model.normal);
            (n.x, n.y)
        })
        .collect();
    assert_eq!(r.walls.len(), 3, "{world:?}");
    for expected in [(0.0, 1.0), (0.0, -1.0), (-1.0, 0.0)] {
        assert!(
            world.iter().any(|n| n.0 * expected.0 + n.1 * expected.1 > 10f64.to_radians().cos()),
            "{expected:?} missing in {world:?}"
        );
    }
    assert!(r.doors.is_empty());
}

#[test]
fn corridor_frame_agrees_with_truth() {
    let frame = simulate_frame(&corridor(), &SensorSpec::default(), &Pose::planar(5.0, 1.0, 0.0, 0.0), 3).unwrap();
    let r = classify_frame(&frame.scan, &Config::default(), 1).unwrap();
    let agreement = |label: Label| {
        let truth: Vec<usize> = (0..frame.truth.len()).filter(|&i| frame.truth[i] == label).collect();
        let same = truth.iter().filter(|&&i| r.cloud.points[i].label == label).count();
        same as f64 / truth.len() as f64
    };
    assert!(agreement(Label::Wall) >= 0.95, "{}", agreement(Label::Wall));
    assert_eq!(agreement(Label::Floor), 1.0);
    assert!(!r.cloud.points.iter().any(|p| p.label == Label::Door));
}

#[test]
fn single_open_door_found_in_frame() {
    let mut scene = corridor();
    scene.doors.push(DoorSpec {
        wall: 2,
        offset: 4.0,
        width: 0.9,
        lintel: 2.0,
        kind: DoorKind::Open,
        recess: 0.0,
    });
    scene.walls.push(wall(0.0, 2.0, 0.0, 5.0));
    scene.walls.push(wall(0.0, 5.0, 10.0, 5.0));
    scene.walls.push(wall(10.0, 5.0, 10.0, 2.0));
    let frame = simulate_frame(&scene, &SensorSpec::default(), &Pose::planar(5.55, 1.0, 0.0, 0.0), 3).unwrap();
    let r = classify_frame(&frame.scan, &Config::default(), 1).unwrap();
    assert!(!r.doors.is_empty());
    for d in &r.doors {
        assert_eq!(d.kind, DoorKind::Open);
        assert!((d.lintel_z - 2.0).abs() < 0.05, "{}", d.lintel_z);
    }
}

fn ffmap() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ffmap"))
}

#[test]
fn missing_trajectory_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = ffmap()
        .args(["run", "--frames"])
        .arg(dir.path())
        .args(["--trajectory", "/no/such/trajectory.txt", "--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/no/such/trajectory.txt"), "{err}");
}

#[test]
fn unknown_parameter_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = ffmap()
        .args(["run", "--standard", "--set", "bogus=1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "min_points = 10\nresample_count = x\n").unwrap();
    let out = ffmap()
        .args(["run", "--standard", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("c.cfg") && err.contains('2'), "{err}");
}

#[test]
fn evaluate_and_gridcmp_on_run_output() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("corridor.txt");
    let text = "ceiling 2.7\n\
                wall 0 0 10 0 2.7 0.1\nwall 10 0 10 2 2.7 0.1\nwall 10 2 0 2 2.7 0.1\nwall 0 2 0 0 2.7 0.1\n\
                box 3 0.3 0 1 0.5 0.8\n\
                sensor 32 30 512 30 0 1.2\n\
                waypoint 0 8 1 180\nwaypoint 4 2 1 180\nrate 1\nseed 3\n";
    std::fs::write(&scene, text).unwrap();
    let out = dir.path().join("o");
    let run = ffmap().args(["run", "--jobs", "2", "--scene"]).arg(&scene).arg("--out").arg(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for f in ["labeled.ply", "truth_labeled.ply", "metrics.tsv", "timing.txt", "furniture_free.pgm", "furniture_free.yaml"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let timing = std::fs::read_to_string(out.join("timing.txt")).unwrap();
    assert!(timing.starts_with("frames\t5\n"), "{timing}");

    let eval = ffmap()
        .args(["evaluate", "--pred"])
        .arg(out.join("labeled.ply"))
        .arg("--truth")
        .arg(out.join("truth_labeled.ply"))
        .output()
        .unwrap();
    assert!(eval.status.success());
    let table = String::from_utf8_lossy(&eval.stdout);
    assert!(table.starts_with("label\tFP\tTP\tFN\tPrecision\tRecall\tF1-Measure\n"));
    assert_eq!(table.lines().count(), 6);

    let cmp = ffmap()
        .arg("gridcmp")
        .arg(out.join("furniture_free.pgm"))
        .arg(out.join("furniture_free.pgm"))
        .output()
        .unwrap();
    assert_eq!(String::from_utf8_lossy(&cmp.stdout).trim(), "100.00");
}
