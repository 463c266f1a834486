//! End-to-end runs: load or simulate inputs, classify, fuse, write artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{metrics, metrics_table, LabelMetrics};
use crate::geometry::{Label, Point3, Pose};
use crate::io::pgm::write_grid;
use crate::io::ply::{read_ply, write_labeled_cloud, write_ply};
use crate::io::trajectory::{read_trajectory, write_trajectory};
use crate::labeling::{LabeledCloud, LabeledPoint};
use crate::map::{build_grids, GridSet, Trajectory};
use crate::oracle::scene_file::Scenario;
use crate::oracle::{trajectory_through, vertical_mount, SimulatedFrame};
use crate::pipeline::{run_pipeline, RunOutput, TimingStats};
use crate::rearrange::{beam_angle, recover_rings, OrganizedScan, RawPoint};

/// Scans to classify, their trajectory, and per-point truth when known.
pub struct RunInputs {
    pub scans: Vec<OrganizedScan>,
    pub trajectory: Trajectory,
    pub truth: Option<Vec<Vec<Label>>>,
}

impl RunInputs {
    pub fn from_simulation(frames: &[SimulatedFrame]) -> Result<RunInputs> {
        Ok(RunInputs {
            scans: frames.iter().map(|f| f.scan.clone()).collect(),
            trajectory: Trajectory::new(frames.iter().map(|f| f.pose).collect())?,
            truth: Some(frames.iter().map(|f| f.truth.clone()).collect()),
        })
    }

    pub fn simulate(scenario: &Scenario) -> Result<RunInputs> {
        let frames = trajectory_through(
            &scenario.scene,
            &scenario.sensor,
            &scenario.waypoints,
            scenario.frame_rate,
            scenario.seed,
        )?;
        Self::from_simulation(&frames)
    }

    /// Reads every `*.ply` in `dir`, each named by its timestamp in seconds,
    /// in timestamp order. Points are in the sensor frame.
    pub fn load_recorded(dir: &Path, trajectory: &Path, cfg: &Config) -> Result<RunInputs> {
        let trajectory = read_trajectory(trajectory)?;
        let mut files: Vec<(f64, PathBuf)> = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("ply") {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            match stem.parse::<f64>() {
                Ok(t) if t.is_finite() => files.push((t, path)),
                _ => warn!("ignoring {}: file name is not a timestamp", path.display()),
            }
        }
        if files.is_empty() {
            return Err(Error::parse(dir, 0, "no timestamp-named .ply frames"));
        }
        files.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mount = vertical_mount(cfg.mount_height);
        let mut scans = Vec::new();
        let mut truth = Some(Vec::new());
        for (t, path) in files {
            let cloud = read_ply(&path)?;
            let rings = match cloud.rings {
                Some(r) => r,
                None => {
                    let angles: Vec<f64> = cloud.points.iter().map(|p| beam_angle(p).unwrap_or(0.0)).collect();
                    recover_rings(&angles, cfg.n_beams)
                }
            };
            if let Some(r) = rings.iter().find(|&&r| r as usize >= cfg.n_beams) {
                return Err(Error::parse(&path, 0, format!("ring {r} exceeds n_beams {}", cfg.n_beams)));
            }
            match (&mut truth, cloud.labels) {
                (Some(tv), Some(l)) => tv.push(l),
                _ => truth = None,
            }
            scans.push(OrganizedScan {
                points: cloud
                    .points
                    .iter()
                    .zip(&rings)
                    .map(|(&position, &ring)| RawPoint { position, ring })
                    .collect(),
                n_beams: cfg.n_beams,
                sensor_to_robot: mount,
                timestamp: t,
            });
        }
        Ok(RunInputs {
            scans,
            trajectory,
            truth,
        })
    }
}

fn timestamp_name(t: f64) -> String {
    format!("{t:013.6}.ply")
}

/// Writes simulated frames as sensor-frame PLYs with ring and true label,
/// plus the trajectory and the scenario.
pub fn write_simulation(out: &Path, scenario: &Scenario) -> Result<usize> {
    let frames = trajectory_through(
        &scenario.scene,
        &scenario.sensor,
        &scenario.waypoints,
        scenario.frame_rate,
        scenario.seed,
    )?;
    let dir = out.join("frames");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for f in &frames {
        let pts: Vec<Point3> = f.scan.points.iter().map(|p| p.position).collect();
        let rings: Vec<u16> = f.scan.points.iter().map(|p| p.ring).collect();
        write_ply(&dir.join(timestamp_name(f.pose.timestamp)), &pts, Some(&rings), Some(&f.truth))?;
    }
    let poses: Vec<Pose> = frames.iter().map(|f| f.pose).collect();
    write_trajectory(&out.join("trajectory.txt"), &poses)?;
    crate::io::ply::write_file(&out.join("scene.txt"), scenario.to_text().as_bytes())?;
    Ok(frames.len())
}

/// Everything a run produced.
pub struct RunReport {
    pub output: RunOutput,
    pub grids: GridSet,
    pub truth: Option<LabeledCloud>,
    pub metrics: Option<Vec<LabelMetrics>>,
}

/// Positions of the fused cloud carrying the true labels of the same points.
pub fn fused_truth(output: &RunOutput, truth: &[Vec<Label>]) -> Result<LabeledCloud> {
    let labels: Vec<Label> = output.fused.iter().flat_map(|&i| truth[i].iter().copied()).collect();
    if labels.len() != output.map.cloud.len() {
        return Err(Error::Mismatch(format!(
            "{} truth labels for {} fused points",
            labels.len(),
            output.map.cloud.len()
        )));
    }
    Ok(LabeledCloud {
        points: output
            .map
            .cloud
            .points
            .iter()
            .zip(labels)
            .map(|(p, label)| LabeledPoint {
                position: p.position,
                label,
            })
            .collect(),
        ..output.map.cloud.clone()
    })
}

pub fn execute(inputs: &RunInputs, cfg: &Config, jobs: usize) -> Result<RunReport> {
    let output = run_pipeline(&inputs.scans, &inputs.trajectory, cfg, jobs)?;
    let grids = build_grids(&output.map, cfg.resolution, cfg.min_hits, &cfg.slices())?;
    let (truth, metrics) = match &inputs.truth {
        Some(t) => {
            let truth = fused_truth(&output, t)?;
            let m = metrics(&output.map.cloud, &truth, 1e-9)?;
            (Some(truth), Some(m))
        }
        None => (None, None),
    };
    Ok(RunReport {
        output,
        grids,
        truth,
        metrics,
    })
}

pub fn timing_report(t: &TimingStats) -> String {
    let mut s = String::new();
    writeln!(s, "frames\t{}", t.frames).unwrap();
    writeln!(s, "average_ms\t{:.3}", t.mean).unwrap();
    writeln!(s, "std_ms\t{:.3}", t.std).unwrap();
    writeln!(s, "min_ms\t{:.3}", t.min).unwrap();
    writeln!(s, "max_ms\t{:.3}", t.max).unwrap();
    s
}

/// Runs the pipeline and writes its artifacts into `out`.
pub fn run_to_dir(inputs: &RunInputs, cfg: &Config, jobs: usize, out: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let report = execute(inputs, cfg, jobs)?;
    write_labeled_cloud(&out.join("labeled.ply"), &report.output.map.cloud)?;
    write_grid(&out.join("furniture_free.pgm"), &report.grids.furniture_free)?;
    write_grid(&out.join("slice_below_ceiling.pgm"), &report.grids.below_ceiling)?;
    write_grid(&out.join("slice_mid_height.pgm"), &report.grids.mid_height)?;
    crate::io::ply::write_file(&out.join("timing.txt"), timing_report(&report.output.timing).as_bytes())?;
    if let (Some(truth), Some(m)) = (&report.truth, &report.metrics) {
        write_labeled_cloud(&out.join("truth_labeled.ply"), truth)?;
        crate::io::ply::write_file(&out.join("metrics.tsv"), metrics_table(m).as_bytes())?;
    } else {
        info!("no ground truth; metrics.tsv not written");
    }
    Ok(report)
}

/// Reads two labeled PLYs and scores the first against the second.
pub fn evaluate_files(pred: &Path, truth: &Path, match_tol: f64) -> Result<Vec<LabelMetrics>> {
    let load = |p: &Path| -> Result<LabeledCloud> {
        let c = read_ply(p)?;
        let labels = c.labels.ok_or_else(|| Error::parse(p, 0, "no `label` property"))?;
        Ok(LabeledCloud::from_parts(
            &c.points,
            &labels,
            crate::labeling::FrameId::World,
            0.0,
        ))
    };
    metrics(&load(pred)?, &load(truth)?, match_tol)
}
