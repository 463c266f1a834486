//! Per-frame classification and the multi-frame mapping run.

use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::{Label, Point3};
use crate::labeling::{detect_doors, label_frame, DoorDetection, FrameId, FrameParts, LabeledCloud};
use crate::map::{fuse_frames, relabel_from_map_walls, FusedMap, Trajectory};
use crate::rearrange::{
    extract_ceiling, partition_into_lines, remove_floor, resample_line, OrganizedScan, PointLine,
};
use crate::walls::{detect_walls, WallDetection, WallPlane};

/// Classification of one scan, in the robot frame.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub cloud: LabeledCloud,
    pub ceiling_height: Option<f64>,
    pub walls: Vec<WallPlane>,
    pub doors: Vec<DoorDetection>,
    /// Wall-detection stage time in milliseconds.
    pub wall_ms: f64,
}

/// Runs floor removal, ceiling extraction, line rearrangement, wall growing,
/// door detection and labeling on one scan.
pub fn classify_frame(scan: &OrganizedScan, cfg: &Config, seed: u64) -> Result<FrameResult> {
    let robot = scan.robot_points();
    let (floor, rest) = remove_floor(&robot, cfg.z_floor);
    let (ceiling, remainder, ceiling_height) = match extract_ceiling(&robot, &rest, &cfg.ceiling(), seed) {
        Ok(split) => {
            let h = split.height();
            (split.ceiling, split.remainder, Some(h))
        }
        Err(Error::NoCeilingFound) => {
            debug!("frame {}: no ceiling plane", scan.timestamp);
            (Vec::new(), rest, None)
        }
        Err(e) => return Err(e),
    };

    let started = Instant::now();
    let lines: Vec<PointLine> = partition_into_lines(scan, &robot, &remainder)
        .into_iter()
        .filter(|l| l.len() >= 2)
        .collect();
    let resampled = lines
        .iter()
        .map(|l| resample_line(l, cfg.resample_count))
        .collect::<Result<Vec<_>>>()?;
    let walls: WallDetection = detect_walls(&resampled, &cfg.walls(), seed);
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let doors = detect_doors(&resampled, &walls, &cfg.doors());

    let labels = label_frame(
        &FrameParts {
            points: &robot,
            floor: &floor,
            ceiling: &ceiling,
            lines: &lines,
            walls: &walls,
            doors: &doors,
        },
        &cfg.labels(),
    );
    Ok(FrameResult {
        cloud: LabeledCloud::from_parts(&robot, &labels, FrameId::Robot, scan.timestamp),
        ceiling_height,
        walls: walls.planes,
        doors,
        wall_ms,
    })
}

/// Wall-detection timing over a run, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingStats {
    pub frames: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl TimingStats {
    pub fn of(samples: &[f64]) -> TimingStats {
        let n = samples.len();
        if n == 0 {
            return TimingStats {
                frames: 0,
                mean: 0.0,
                std: 0.0,
                min: 0.0,
                max: 0.0,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
        TimingStats {
            frames: n,
            mean,
            std: var.sqrt(),
            min: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

pub struct RunOutput {
    /// Classified frames, with their index in the input.
    pub frames: Vec<(usize, FrameResult)>,
    pub map: FusedMap,
    /// Input index of each frame that made it into the map, in map order.
    pub fused: Vec<usize>,
    pub timing: TimingStats,
}

fn frame_seed(seed: u64, i: usize) -> u64 {
    crate::oracle::frame_seed(seed, i)
}

/// Classifies every scan (in parallel when `jobs != 1`) and fuses the
/// results along the trajectory. Frames are processed independently, so the
/// output does not depend on `jobs`. A frame that fails to classify is
/// skipped with a warning.
pub fn run_pipeline(scans: &[OrganizedScan], trajectory: &Trajectory, cfg: &Config, jobs: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let classify = |(i, s): (usize, &OrganizedScan)| (i, classify_frame(s, cfg, frame_seed(cfg.seed, i)));
    let results: Vec<(usize, Result<FrameResult>)> = if jobs == 1 {
        scans.iter().enumerate().map(classify).collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if jobs > 0 {
            builder = builder.num_threads(jobs);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| scans.par_iter().enumerate().map(classify).collect())
    };
    let mut frames = Vec::with_capacity(results.len());
    for (i, r) in results {
        match r {
            Ok(f) => frames.push((i, f)),
            Err(e) => warn!("skipping frame {i}: {e}"),
        }
    }
    let timing = TimingStats::of(&frames.iter().map(|(_, f)| f.wall_ms).collect::<Vec<_>>());
    let classified: Vec<FrameResult> = frames.iter().map(|(_, f)| f.clone()).collect();
    let mut map = fuse_frames(&classified, trajectory)?;
    if cfg.map_relabel {
        let n = relabel_from_map_walls(&mut map, cfg.wall_band, cfg.extent_margin);
        debug!("{n} clutter points moved onto map walls");
    }
    if map.skipped > 0 {
        warn!("{} frames fell outside the trajectory and were skipped", map.skipped);
    }
    let fused = map.frames_used.iter().map(|&k| frames[k].0).collect();
    Ok(RunOutput {
        frames,
        map,
        fused,
        timing,
    })
}

/// Transforms a robot-frame labeled cloud into the world frame.
pub fn to_world(cloud: &LabeledCloud, pose: &crate::geometry::Pose) -> LabeledCloud {
    let pts: Vec<Point3> = cloud.points.iter().map(|p| pose.transform_point(&p.position)).collect();
    let labels: Vec<Label> = cloud.points.iter().map(|p| p.label).collect();
    LabeledCloud::from_parts(&pts, &labels, FrameId::World, cloud.timestamp)
}
