//! World-frame fusion of classified frames and 2D grid rendering.

use log::warn;

use crate::error::{Error, Result};
use crate::geometry::{Label, Point3, Pose};
use crate::labeling::{DoorKind, FrameId, LabeledCloud, LabeledPoint, WallExtent};
use crate::pipeline::FrameResult;

/// Time-ordered robot poses in the world.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(mut poses: Vec<Pose>) -> Result<Trajectory> {
        if poses.is_empty() {
            return Err(Error::InvalidPose("trajectory is empty".into()));
        }
        poses.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        Ok(Trajectory { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn span(&self) -> (f64, f64) {
        (self.poses[0].timestamp, self.poses[self.poses.len() - 1].timestamp)
    }

    /// Pose at `t`, interpolated between the bracketing samples.
    pub fn pose_at(&self, t: f64) -> Result<Pose> {
        let (start, end) = self.span();
        if !(t >= start && t <= end) {
            return Err(Error::TimestampOutOfRange { t, start, end });
        }
        let j = self.poses.partition_point(|p| p.timestamp < t);
        if j < self.poses.len() && self.poses[j].timestamp == t {
            return Ok(self.poses[j]);
        }
        let (a, b) = (&self.poses[j - 1], &self.poses[j]);
        let s = (t - a.timestamp) / (b.timestamp - a.timestamp);
        Ok(Pose::interpolate(a, b, s))
    }
}

/// A detected door line in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoorMark {
    /// Last on-wall return above the opening, projected onto the wall.
    pub point: Point3,
    /// Horizontal wall normal.
    pub normal: Point3,
    pub lintel_z: f64,
    pub kind: DoorKind,
    pub frame: usize,
}

#[derive(Debug, Clone)]
pub struct FusedMap {
    pub cloud: LabeledCloud,
    pub doors: Vec<DoorMark>,
    /// Every frame's wall planes in the world, limited to their members' span.
    pub walls: Vec<WallExtent>,
    /// Indices of the input frames that were fused, in order.
    pub frames_used: Vec<usize>,
    /// Frames dropped for lying outside the trajectory.
    pub skipped: usize,
}

impl FusedMap {
    /// Median height of ceiling-labeled points.
    pub fn ceiling_height(&self) -> Option<f64> {
        let mut z: Vec<f64> = self.cloud.with_label(Label::Ceiling).map(|p| p.z).collect();
        if z.is_empty() {
            return None;
        }
        z.sort_by(f64::total_cmp);
        Some(z[z.len() / 2])
    }
}

/// Moves every frame into the world by the pose at its timestamp and
/// concatenates them in input order.
pub fn fuse_frames(frames: &[FrameResult], trajectory: &Trajectory) -> Result<FusedMap> {
    let mut points = Vec::new();
    let mut doors = Vec::new();
    let mut walls = Vec::new();
    let mut frames_used = Vec::new();
    let mut skipped = 0;
    for (fi, f) in frames.iter().enumerate() {
        let pose = match trajectory.pose_at(f.cloud.timestamp) {
            Ok(p) => p,
            Err(e) => {
                warn!("skipping frame {fi}: {e}");
                skipped += 1;
                continue;
            }
        };
        frames_used.push(fi);
        points.extend(f.cloud.points.iter().map(|p| LabeledPoint {
            position: pose.transform_point(&p.position),
            label: p.label,
        }));
        walls.extend(f.walls.iter().map(|w| WallExtent::new(w, 0.0).transformed(&pose)));
        for d in &f.doors {
            let n = pose.rotate(&f.walls[d.wall].model.normal);
            let n = Point3::new(n.x, n.y, 0.0);
            doors.push(DoorMark {
                point: pose.transform_point(&d.lintel_point),
                normal: if n.norm() > 1e-9 { n.normalized() } else { n },
                lintel_z: d.lintel_z + pose.translation.z,
                kind: d.kind,
                frame: fi,
            });
        }
    }
    let timestamp = frames.first().map_or(0.0, |f| f.cloud.timestamp);
    Ok(FusedMap {
        cloud: LabeledCloud {
            points,
            frame_id: FrameId::World,
            timestamp,
        },
        doors,
        walls,
        frames_used,
        skipped,
    })
}

/// Relabels clutter points that lie on a wall plane found in any frame, so
/// wall seen only past an occluder in one frame inherits the detection from
/// frames that saw it directly. Returns the number of relabeled points.
pub fn relabel_from_map_walls(map: &mut FusedMap, band: f64, margin: f64) -> usize {
    let extents: Vec<WallExtent> = map
        .walls
        .iter()
        .map(|e| WallExtent {
            lo: e.lo - margin,
            hi: e.hi + margin,
            ..*e
        })
        .collect();
    let mut n = 0;
    for p in map.cloud.points.iter_mut().filter(|p| p.label == Label::Clutter) {
        if extents.iter().any(|e| e.contains(&p.position, band)) {
            p.label = Label::Wall;
            n += 1;
        }
    }
    n
}

/// Cell state, stored as its PGM byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Cell {
    Occupied = 0,
    Unknown = 205,
    Free = 254,
}

impl Cell {
    pub fn from_byte(b: u8) -> Option<Cell> {
        match b {
            0 => Some(Cell::Occupied),
            205 => Some(Cell::Unknown),
            254 => Some(Cell::Free),
            _ => None,
        }
    }
}

/// Placement and size of a grid. Cell `(i, j)` covers
/// `[ox + i·r, ox + (i+1)·r) × [oy + j·r, oy + (j+1)·r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridFrame {
    pub origin: (f64, f64),
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
}

impl GridFrame {
    /// Smallest frame covering `points` with one cell of padding, origin on a
    /// multiple of the resolution.
    pub fn covering<'a>(points: impl IntoIterator<Item = &'a Point3>, resolution: f64) -> Result<GridFrame> {
        if !(resolution > 0.0) {
            return Err(Error::InvalidConfig("resolution must be positive".into()));
        }
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            lo = (lo.0.min(p.x), lo.1.min(p.y));
            hi = (hi.0.max(p.x), hi.1.max(p.y));
        }
        if !lo.0.is_finite() {
            return Err(Error::EmptyCloud);
        }
        let origin = (
            (lo.0 / resolution).floor() * resolution - resolution,
            (lo.1 / resolution).floor() * resolution - resolution,
        );
        let width = ((hi.0 - origin.0) / resolution).floor() as usize + 2;
        let height = ((hi.1 - origin.1) / resolution).floor() as usize + 2;
        Ok(GridFrame {
            origin,
            width,
            height,
            resolution,
        })
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let i = ((x - self.origin.0) / self.resolution).floor();
        let j = ((y - self.origin.1) / self.resolution).floor();
        if i < 0.0 || j < 0.0 || i >= self.width as f64 || j >= self.height as f64 {
            return None;
        }
        Some((i as usize, j as usize))
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (i as f64 + 0.5) * self.resolution,
            self.origin.1 + (j as f64 + 0.5) * self.resolution,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: (f64, f64),
    /// Row-major from the minimum-y row.
    pub cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn new(frame: &GridFrame, fill: Cell) -> OccupancyGrid {
        OccupancyGrid {
            width: frame.width,
            height: frame.height,
            resolution: frame.resolution,
            origin: frame.origin,
            cells: vec![fill; frame.width * frame.height],
        }
    }

    pub fn frame(&self) -> GridFrame {
        GridFrame {
            origin: self.origin,
            width: self.width,
            height: self.height,
            resolution: self.resolution,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Cell {
        self.cells[j * self.width + i]
    }

    pub fn set(&mut self, i: usize, j: usize, c: Cell) {
        self.cells[j * self.width + i] = c;
    }

    pub fn at(&self, x: f64, y: f64) -> Option<Cell> {
        self.frame().cell_of(x, y).map(|(i, j)| self.get(i, j))
    }

    pub fn count(&self, c: Cell) -> usize {
        self.cells.iter().filter(|&&v| v == c).count()
    }

    /// Fraction of cells with equal state; `None` when frames differ.
    pub fn agreement(&self, other: &OccupancyGrid) -> Option<f64> {
        if self.frame() != other.frame() {
            return None;
        }
        let same = self.cells.iter().zip(&other.cells).filter(|(a, b)| a == b).count();
        Some(same as f64 / self.cells.len().max(1) as f64)
    }
}

/// Convex hull (counter-clockwise, monotone chain) of 2D points.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut p: Vec<(f64, f64)> = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

fn inside_convex(hull: &[(f64, f64)], q: (f64, f64)) -> bool {
    if hull.len() < 3 {
        return false;
    }
    (0..hull.len()).all(|k| {
        let a = hull[k];
        let b = hull[(k + 1) % hull.len()];
        (b.0 - a.0) * (q.1 - a.1) - (b.1 - a.1) * (q.0 - a.0) >= 0.0
    })
}

/// Marks cells whose centers lie inside the hull of `xy` as free.
fn fill_free(grid: &mut OccupancyGrid, xy: &[(f64, f64)]) {
    let hull = convex_hull(xy);
    let frame = grid.frame();
    for j in 0..grid.height {
        for i in 0..grid.width {
            if inside_convex(&hull, frame.center(i, j)) {
                grid.set(i, j, Cell::Free);
            }
        }
    }
}

fn hit_counts<'a>(frame: &GridFrame, points: impl Iterator<Item = &'a Point3>) -> Vec<u32> {
    let mut counts = vec![0u32; frame.width * frame.height];
    for p in points {
        if let Some((i, j)) = frame.cell_of(p.x, p.y) {
            counts[j * frame.width + i] += 1;
        }
    }
    counts
}

/// Door marks closer than this, on parallel walls, belong to one doorway.
const DOOR_LINK: f64 = 0.3;
/// Cells within this many cells of a doorway's center line are cleared.
const DOOR_CLEARANCE_CELLS: f64 = 2.0;

/// Groups door marks into doorways by single-link clustering.
pub fn cluster_doors(marks: &[DoorMark]) -> Vec<Vec<usize>> {
    let n = marks.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..n {
        for b in a + 1..n {
            let (pa, pb) = (&marks[a], &marks[b]);
            let dx = pa.point.x - pb.point.x;
            let dy = pa.point.y - pb.point.y;
            if dx.hypot(dy) <= DOOR_LINK && pa.normal.dot(&pb.normal).abs() > 0.9 {
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Clears the cells spanned by each doorway: along the wall between the
/// outermost marks, across it within a fixed clearance of their mean line.
fn clear_doorways(grid: &mut OccupancyGrid, marks: &[DoorMark]) {
    let frame = grid.frame();
    let r = frame.resolution;
    for group in cluster_doors(marks) {
        let n0 = marks[group[0]].normal;
        let normal = if n0.norm() > 1e-9 { n0 } else { Point3::new(0.0, 1.0, 0.0) };
        let along = Point3::new(-normal.y, normal.x, 0.0);
        let mut tmin = f64::INFINITY;
        let mut tmax = f64::NEG_INFINITY;
        let mut off = 0.0;
        for &k in &group {
            let p = Point3::new(marks[k].point.x, marks[k].point.y, 0.0);
            let t = along.dot(&p);
            tmin = tmin.min(t);
            tmax = tmax.max(t);
            off += normal.dot(&p);
        }
        off /= group.len() as f64;
        let clear = DOOR_CLEARANCE_CELLS * r + 0.5 * r;
        for j in 0..grid.height {
            for i in 0..grid.width {
                let (x, y) = frame.center(i, j);
                let c = Point3::new(x, y, 0.0);
                let t = along.dot(&c);
                if t >= tmin - 0.5 * r && t <= tmax + 0.5 * r && (normal.dot(&c) - off).abs() <= clear {
                    grid.set(i, j, Cell::Free);
                }
            }
        }
    }
}

/// Occupancy from wall-labeled points only. Cells with at least `min_hits`
/// wall points are occupied; door-labeled cells and detected doorways are
/// then forced free; other cells inside the floor/wall hull are free.
pub fn build_furniture_free_grid(
    cloud: &LabeledCloud,
    doors: &[DoorMark],
    frame: &GridFrame,
    min_hits: usize,
) -> Result<OccupancyGrid> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut grid = OccupancyGrid::new(frame, Cell::Unknown);
    let xy: Vec<(f64, f64)> = cloud
        .points
        .iter()
        .filter(|p| matches!(p.label, Label::Floor | Label::Wall))
        .map(|p| (p.position.x, p.position.y))
        .collect();
    fill_free(&mut grid, &xy);
    let wall = hit_counts(frame, cloud.with_label(Label::Wall));
    let door = hit_counts(frame, cloud.with_label(Label::Door));
    let min_hits = min_hits as u32;
    for (k, &c) in wall.iter().enumerate() {
        if c >= min_hits {
            grid.cells[k] = Cell::Occupied;
        }
    }
    for (k, &c) in door.iter().enumerate() {
        if c >= min_hits {
            grid.cells[k] = Cell::Free;
        }
    }
    clear_doorways(&mut grid, doors);
    Ok(grid)
}

/// Height band of a slice map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SliceMode {
    /// `[ceiling - bottom, ceiling - top]`.
    BelowCeiling { ceiling: f64, top: f64, bottom: f64 },
    MidHeight { z1: f64, z2: f64 },
}

impl SliceMode {
    pub fn band(&self) -> (f64, f64) {
        match *self {
            SliceMode::BelowCeiling { ceiling, top, bottom } => (ceiling - bottom, ceiling - top),
            SliceMode::MidHeight { z1, z2 } => (z1.min(z2), z1.max(z2)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceParams {
    pub below_ceiling_top: f64,
    pub below_ceiling_bottom: f64,
    /// Half-height of the band centered at half the ceiling height.
    pub mid_half_width: f64,
}

impl SliceParams {
    pub fn below_ceiling(&self, ceiling: f64) -> SliceMode {
        SliceMode::BelowCeiling {
            ceiling,
            top: self.below_ceiling_top,
            bottom: self.below_ceiling_bottom,
        }
    }

    pub fn mid_height(&self, ceiling: f64) -> SliceMode {
        let c = ceiling / 2.0;
        SliceMode::MidHeight {
            z1: c - self.mid_half_width,
            z2: c + self.mid_half_width,
        }
    }
}

/// Occupancy from every point whose height falls in the band; other cells
/// inside the hull of all points are free.
pub fn build_slice_grid(points: &[Point3], mode: SliceMode, frame: &GridFrame) -> OccupancyGrid {
    let mut grid = OccupancyGrid::new(frame, Cell::Unknown);
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
    fill_free(&mut grid, &xy);
    let (lo, hi) = mode.band();
    for p in points {
        if p.z >= lo && p.z <= hi {
            if let Some((i, j)) = frame.cell_of(p.x, p.y) {
                grid.set(i, j, Cell::Occupied);
            }
        }
    }
    grid
}

/// The three grids written by a run, on one shared frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSet {
    pub furniture_free: OccupancyGrid,
    pub below_ceiling: OccupancyGrid,
    pub mid_height: OccupancyGrid,
}

pub fn build_grids(map: &FusedMap, resolution: f64, min_hits: usize, slices: &SliceParams) -> Result<GridSet> {
    let frame = GridFrame::covering(map.cloud.points.iter().map(|p| &p.position), resolution)?;
    let ceiling = map.ceiling_height().ok_or(Error::NoCeilingFound)?;
    let all: Vec<Point3> = map.cloud.points.iter().map(|p| p.position).collect();
    Ok(GridSet {
        furniture_free: build_furniture_free_grid(&map.cloud, &map.doors, &frame, min_hits)?,
        below_ceiling: build_slice_grid(&all, slices.below_ceiling(ceiling), &frame),
        mid_height: build_slice_grid(&all, slices.mid_height(ceiling), &frame),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(pts: &[(Point3, Label)]) -> LabeledCloud {
        LabeledCloud {
            points: pts.iter().map(|&(position, label)| LabeledPoint { position, label }).collect(),
            frame_id: FrameId::World,
            timestamp: 0.0,
        }
    }

    #[test]
    fn midway_interpolation() {
        let a = Pose::planar(0.0, 0.0, 0.0, 0.0);
        let b = Pose::planar(2.0, 0.0, 0.0, 2.0);
        let t = Trajectory::new(vec![b, a]).unwrap();
        let p = t.pose_at(1.0).unwrap();
        assert!((p.translation.x - 1.0).abs() < 1e-12);
        assert!(matches!(t.pose_at(2.5), Err(Error::TimestampOutOfRange { .. })));
        assert_eq!(t.pose_at(2.0).unwrap(), b);
    }

    #[test]
    fn one_meter_wall_is_twenty_cells() {
        let pts: Vec<(Point3, Label)> = (0..200)
            .flat_map(|k| {
                let x = 0.0025 + k as f64 * 0.005;
                (0..4).map(move |h| (Point3::new(x, 0.025, 0.5 + h as f64 * 0.3), Label::Wall))
            })
            .collect();
        let c = cloud(&pts);
        let frame = GridFrame::covering(c.points.iter().map(|p| &p.position), 0.05).unwrap();
        let g = build_furniture_free_grid(&c, &[], &frame, 3).unwrap();
        assert_eq!(g.count(Cell::Occupied), 20);
    }

    #[test]
    fn clutter_never_occupies() {
        let c = cloud(&[
            (Point3::new(0.0, 0.0, 0.0), Label::Floor),
            (Point3::new(1.0, 0.0, 0.0), Label::Floor),
            (Point3::new(0.0, 1.0, 0.0), Label::Floor),
            (Point3::new(0.5, 0.2, 0.5), Label::Clutter),
            (Point3::new(0.5, 0.2, 0.6), Label::Clutter),
            (Point3::new(0.5, 0.2, 0.7), Label::Clutter),
        ]);
        let frame = GridFrame::covering(c.points.iter().map(|p| &p.position), 0.05).unwrap();
        let g = build_furniture_free_grid(&c, &[], &frame, 3).unwrap();
        assert_eq!(g.count(Cell::Occupied), 0);
        assert_eq!(g.at(0.5, 0.2), Some(Cell::Free));
        assert!(build_furniture_free_grid(&cloud(&[]), &[], &frame, 3).is_err());
    }

    #[test]
    fn empty_band_occupies_nothing() {
        let pts = [Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 0.1), Point3::new(1.0, 0.0, 0.2)];
        let frame = GridFrame::covering(pts.iter(), 0.05).unwrap();
        let g = build_slice_grid(&pts, SliceMode::MidHeight { z1: 1.0, z2: 1.2 }, &frame);
        assert_eq!(g.count(Cell::Occupied), 0);
    }

    #[test]
    fn hull_of_square() {
        let h = convex_hull(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)]);
        assert_eq!(h.len(), 4);
        assert!(inside_convex(&h, (0.5, 0.5)));
        assert!(!inside_convex(&h, (1.5, 0.5)));
    }

    #[test]
    fn doorway_marks_clear_cells() {
        let mut pts: Vec<(Point3, Label)> = Vec::new();
        for k in 0..60 {
            let x = k as f64 * 0.05 + 0.025;
            for z in [0.5, 1.0, 2.2] {
                pts.push((Point3::new(x, 1.0, z), Label::Wall));
            }
            pts.push((Point3::new(x, 0.0, 0.0), Label::Floor));
        }
        let c = cloud(&pts);
        let frame = GridFrame::covering(c.points.iter().map(|p| &p.position), 0.05).unwrap();
        let marks: Vec<DoorMark> = (0..5)
            .map(|k| DoorMark {
                point: Point3::new(1.2 + 0.15 * k as f64, 1.0, 2.0),
                normal: Point3::new(0.0, -1.0, 0.0),
                lintel_z: 2.0,
                kind: DoorKind::Open,
                frame: 0,
            })
            .collect();
        let g = build_furniture_free_grid(&c, &marks, &frame, 3).unwrap();
        assert_eq!(g.at(1.5, 1.0), Some(Cell::Free));
        assert_eq!(g.at(0.5, 1.0), Some(Cell::Occupied));
        assert_eq!(cluster_doors(&marks).len(), 1);
    }
}
