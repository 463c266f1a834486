//! Per-point semantic labels for one frame, including the door rules.

use crate::geometry::{Label, PlaneModel, Point3, Pose};
use crate::rearrange::PointLine;
use crate::walls::{WallDetection, WallPlane};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameId {
    Robot,
    World,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub position: Point3,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    pub points: Vec<LabeledPoint>,
    pub frame_id: FrameId,
    pub timestamp: f64,
}

impl LabeledCloud {
    pub fn new(frame_id: FrameId, timestamp: f64) -> Self {
        Self {
            points: Vec::new(),
            frame_id,
            timestamp,
        }
    }

    pub fn from_parts(positions: &[Point3], labels: &[Label], frame_id: FrameId, timestamp: f64) -> Self {
        assert_eq!(positions.len(), labels.len());
        Self {
            points: positions
                .iter()
                .zip(labels)
                .map(|(&position, &label)| LabeledPoint { position, label })
                .collect(),
            frame_id,
            timestamp,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.points.iter().filter(|p| p.label == label).count()
    }

    pub fn with_label(&self, label: Label) -> impl Iterator<Item = &Point3> + '_ {
        self.points.iter().filter(move |p| p.label == label).map(|p| &p.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoorKind {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoorDetection {
    pub line_id: usize,
    /// Height of the first return behind the wall, top of the opening.
    pub lintel_z: f64,
    /// Lowest on-wall point above the opening, projected onto the wall plane.
    pub lintel_point: Point3,
    /// Index into the frame's wall planes.
    pub wall: usize,
    pub kind: DoorKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoorParams {
    /// Minimum depth behind the wall plane for a return to count as recessed.
    pub delta_door: f64,
    pub h_min: f64,
    pub wall_band: f64,
    /// Returns up to this depth behind the wall are door-panel candidates;
    /// deeper returns are seen through an opening.
    pub recess_max: f64,
    /// Fraction of returns below the lintel allowed to miss the recess test.
    pub outlier_frac: f64,
    /// On-wall points required above the opening.
    pub min_points: usize,
}

impl Default for DoorParams {
    fn default() -> Self {
        Self {
            delta_door: 0.02,
            h_min: 1.6,
            wall_band: 0.08,
            recess_max: 0.15,
            outlier_frac: 0.05,
            min_points: 10,
        }
    }
}

/// Applies the three door conditions to one resampled line scanned top to
/// bottom: the upper part lies on `wall`, everything from some index onwards
/// lies behind it (or the line ends), and that index is at least `h_min` high.
pub fn classify_door_line(
    line_id: usize,
    line: &PointLine,
    wall_index: usize,
    wall: &WallPlane,
    p: &DoorParams,
) -> Option<DoorDetection> {
    let n = line.len();
    if n == 0 {
        return None;
    }
    let plane = &wall.model;
    let s: Vec<f64> = line.points.iter().map(|q| plane.distance(q)).collect();
    let behind: Vec<bool> = s.iter().map(|&d| d < -p.delta_door).collect();
    let on_wall: Vec<bool> = s.iter().map(|&d| d.abs() <= p.wall_band).collect();

    // suffix_behind[k] = behind returns in k..n
    let mut suffix_behind = vec![0usize; n + 1];
    for k in (0..n).rev() {
        suffix_behind[k] = suffix_behind[k + 1] + behind[k] as usize;
    }
    let mut on_before = 0usize;
    let mut last_on: Option<usize> = None;
    let mut split = None;
    for k in 0..=n {
        if k > 0 && on_wall[k - 1] && !behind[k - 1] {
            on_before += 1;
            last_on = Some(k - 1);
        }
        if on_before < p.min_points || last_on.is_none() {
            continue;
        }
        if k == n {
            // the line ends on the wall: no returns came back below the lintel
            if last_on == Some(n - 1) {
                split = Some(k);
            }
            break;
        }
        let rest = n - k;
        if behind[k] && suffix_behind[k] as f64 >= (1.0 - p.outlier_frac) * rest as f64 {
            split = Some(k);
            break;
        }
    }
    let k = split?;
    let top = last_on?;
    let lintel_z = if k < n { line.points[k].z } else { line.points[top].z };
    if lintel_z < p.h_min {
        return None;
    }
    let below = &s[k..];
    let recessed = below
        .iter()
        .filter(|&&d| d < -p.delta_door && d >= -p.recess_max)
        .count();
    let kind = if !below.is_empty() && 2 * recessed >= below.len() {
        DoorKind::Closed
    } else {
        DoorKind::Open
    };
    let q = line.points[top];
    Some(DoorDetection {
        line_id,
        lintel_z,
        lintel_point: q - plane.normal * plane.distance(&q),
        wall: wall_index,
        kind,
    })
}

/// Door rules over every line that joined a wall plane.
pub fn detect_doors(lines: &[PointLine], walls: &WallDetection, p: &DoorParams) -> Vec<DoorDetection> {
    let mut out = Vec::new();
    for (w_idx, wall) in walls.planes.iter().enumerate() {
        for &id in &wall.member_lines {
            if let Some(d) = classify_door_line(id, &lines[id], w_idx, wall, p) {
                out.push(d);
            }
        }
    }
    out.sort_by_key(|d| d.line_id);
    out
}

/// A wall plane limited to its members' span along the wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallExtent {
    pub plane: PlaneModel,
    pub along: Point3,
    pub lo: f64,
    pub hi: f64,
}

impl WallExtent {
    pub fn new(w: &WallPlane, margin: f64) -> Self {
        let along = Point3::new(-w.model.normal.y, w.model.normal.x, 0.0);
        let along = if along.norm() > 1e-9 { along.normalized() } else { Point3::new(1.0, 0.0, 0.0) };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for q in &w.member_points {
            let t = along.dot(q);
            lo = lo.min(t);
            hi = hi.max(t);
        }
        Self {
            plane: w.model,
            along,
            lo: lo - margin,
            hi: hi + margin,
        }
    }

    /// The same extent expressed in the parent frame of `pose`.
    pub fn transformed(&self, pose: &Pose) -> Self {
        let normal = pose.rotate(&self.plane.normal);
        let along = pose.rotate(&self.along);
        let t = pose.translation;
        Self {
            plane: PlaneModel {
                normal,
                d: self.plane.d - normal.dot(&t),
                inlier_count: self.plane.inlier_count,
            },
            along,
            lo: self.lo + along.dot(&t),
            hi: self.hi + along.dot(&t),
        }
    }

    pub fn contains(&self, q: &Point3, band: f64) -> bool {
        if self.plane.distance(q).abs() > band {
            return false;
        }
        let t = self.along.dot(q);
        t >= self.lo && t <= self.hi
    }
}

/// Inputs to [`label_frame`], all in the robot frame of one scan.
pub struct FrameParts<'a> {
    pub points: &'a [Point3],
    pub floor: &'a [usize],
    pub ceiling: &'a [usize],
    /// Lines before resampling, in the same order as the resampled ones.
    pub lines: &'a [PointLine],
    pub walls: &'a WallDetection,
    pub doors: &'a [DoorDetection],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelParams {
    pub wall_band: f64,
    /// Slack beyond the members' span along the wall for band labeling.
    pub extent_margin: f64,
    pub delta_door: f64,
    pub recess_max: f64,
}

impl Default for LabelParams {
    fn default() -> Self {
        Self {
            wall_band: 0.08,
            extent_margin: 0.3,
            delta_door: 0.02,
            recess_max: 0.15,
        }
    }
}

/// Assigns one label per input point. Precedence: door, wall, ceiling,
/// floor, clutter. The wall band is applied to returns left over after floor
/// and ceiling removal.
pub fn label_frame(parts: &FrameParts<'_>, params: &LabelParams) -> Vec<Label> {
    let n = parts.points.len();
    let mut labels = vec![Label::Clutter; n];
    let mut structural = vec![false; n];
    for &i in parts.floor {
        labels[i] = Label::Floor;
        structural[i] = true;
    }
    for &i in parts.ceiling {
        labels[i] = Label::Ceiling;
        structural[i] = true;
    }

    let extents: Vec<WallExtent> = parts
        .walls
        .planes
        .iter()
        .map(|w| WallExtent::new(w, params.extent_margin))
        .collect();
    if !extents.is_empty() {
        for i in 0..n {
            if structural[i] {
                continue;
            }
            let q = &parts.points[i];
            if extents.iter().any(|e| e.contains(q, params.wall_band)) {
                labels[i] = Label::Wall;
            }
        }
    }

    for d in parts.doors {
        let plane = &parts.walls.planes[d.wall].model;
        let line = &parts.lines[d.line_id];
        for (q, &src) in line.points.iter().zip(&line.sources) {
            if q.z > d.lintel_z {
                continue;
            }
            let s = plane.distance(q);
            if s < -params.delta_door && s >= -params.recess_max {
                labels[src] = Label::Door;
            }
        }
    }
    labels
}
