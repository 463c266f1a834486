//! Synthetic ground truth: indoor scenes made of vertical wall slabs, doors
//! and furniture boxes, and a ray-cast model of the vertical scanner.

mod raycast;
pub mod scene_file;

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Label, Point3, Pose};
use crate::labeling::DoorKind;
use crate::rearrange::{OrganizedScan, RawPoint};

pub use raycast::{build_geometry, cast, Rect, SurfaceId};

/// Vertical wall slab between two floor points (the slab's centerline).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallSegment {
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub height: f64,
    pub thickness: f64,
}

impl WallSegment {
    pub fn length(&self) -> f64 {
        (self.end.0 - self.start.0).hypot(self.end.1 - self.start.1)
    }

    pub fn direction(&self) -> (f64, f64) {
        let l = self.length();
        ((self.end.0 - self.start.0) / l, (self.end.1 - self.start.1) / l)
    }

    /// Unit normal pointing to the left of `start → end`.
    pub fn left_normal(&self) -> (f64, f64) {
        let (dx, dy) = self.direction();
        (-dy, dx)
    }

    pub fn point_at(&self, s: f64) -> (f64, f64) {
        let (dx, dy) = self.direction();
        (self.start.0 + dx * s, self.start.1 + dy * s)
    }
}

/// Opening in a wall, `offset` meters from the wall's start. A closed door's
/// panel sits `recess` behind the wall's left face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoorSpec {
    pub wall: usize,
    pub offset: f64,
    pub width: f64,
    pub lintel: f64,
    pub kind: DoorKind,
    pub recess: f64,
}

/// Axis-aligned box standing on the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FurnitureBox {
    pub min: Point3,
    pub size: Point3,
}

impl FurnitureBox {
    pub fn contains_xy(&self, x: f64, y: f64, margin: f64) -> bool {
        x > self.min.x + margin
            && x < self.min.x + self.size.x - margin
            && y > self.min.y + margin
            && y < self.min.y + self.size.y - margin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub walls: Vec<WallSegment>,
    pub doors: Vec<DoorSpec>,
    pub furniture: Vec<FurnitureBox>,
    pub ceiling_height: f64,
}

impl SceneSpec {
    /// Bounding box of the wall centerlines in x-y.
    pub fn footprint(&self) -> ((f64, f64), (f64, f64)) {
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for w in &self.walls {
            for p in [w.start, w.end] {
                lo = (lo.0.min(p.0), lo.1.min(p.1));
                hi = (hi.0.max(p.0), hi.1.max(p.1));
            }
        }
        if self.walls.is_empty() {
            return ((0.0, 0.0), (0.0, 0.0));
        }
        (lo, hi)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.ceiling_height > 0.0) {
            return bad("ceiling height must be positive".into());
        }
        for (i, d) in self.doors.iter().enumerate() {
            let Some(w) = self.walls.get(d.wall) else {
                return bad(format!("door {i} references missing wall {}", d.wall));
            };
            if d.offset < 0.0 || d.width <= 0.0 || d.offset + d.width > w.length() + 1e-9 {
                return bad(format!("door {i} does not fit its wall"));
            }
            if d.lintel >= self.ceiling_height || d.lintel > w.height {
                return bad(format!("door {i} lintel must be below the ceiling"));
            }
            if d.kind == DoorKind::Closed && (d.recess < 0.0 || d.recess > w.thickness) {
                return bad(format!("door {i} recess must lie within the wall thickness"));
            }
        }
        let (lo, hi) = self.footprint();
        for (i, b) in self.furniture.iter().enumerate() {
            let mx = b.min + b.size;
            if b.min.x < lo.0 || b.min.y < lo.1 || mx.x > hi.0 || mx.y > hi.1 {
                return bad(format!("box {i} lies outside the room footprint"));
            }
            if b.size.x <= 0.0 || b.size.y <= 0.0 || b.size.z <= 0.0 {
                return bad(format!("box {i} has non-positive size"));
            }
        }
        Ok(())
    }

    /// Whether `p` lies inside a wall slab or a furniture box.
    pub fn is_inside_geometry(&self, p: &Point3) -> bool {
        if self.furniture.iter().any(|b| {
            let mx = b.min + b.size;
            p.x > b.min.x && p.x < mx.x && p.y > b.min.y && p.y < mx.y && p.z > b.min.z && p.z < mx.z
        }) {
            return true;
        }
        for (wi, w) in self.walls.iter().enumerate() {
            let (dx, dy) = w.direction();
            let (nx, ny) = w.left_normal();
            let rx = p.x - w.start.0;
            let ry = p.y - w.start.1;
            let s = rx * dx + ry * dy;
            let off = rx * nx + ry * ny;
            if s < 0.0 || s > w.length() || off.abs() >= w.thickness / 2.0 || p.z >= w.height {
                continue;
            }
            let in_opening = self
                .doors
                .iter()
                .any(|d| d.wall == wi && s > d.offset && s < d.offset + d.width && p.z < d.lintel);
            if !in_opening {
                return true;
            }
        }
        false
    }

    /// Room and corridor joined by one open and one closed door, three boxes.
    pub fn standard() -> SceneSpec {
        let h = 2.7;
        let t = 0.1;
        let wall = |a: (f64, f64), b: (f64, f64)| WallSegment {
            start: a,
            end: b,
            height: h,
            thickness: t,
        };
        SceneSpec {
            walls: vec![
                wall((0.0, 0.0), (6.0, 0.0)),
                wall((6.0, 0.0), (6.0, 5.0)),
                wall((0.0, 7.0), (0.0, 0.0)),
                wall((0.0, 5.0), (10.0, 5.0)),
                wall((10.0, 5.0), (10.0, 7.0)),
                wall((10.0, 7.0), (0.0, 7.0)),
            ],
            doors: vec![
                DoorSpec {
                    wall: 3,
                    offset: 1.5,
                    width: 0.9,
                    lintel: 2.0,
                    kind: DoorKind::Open,
                    recess: 0.0,
                },
                DoorSpec {
                    wall: 3,
                    offset: 4.0,
                    width: 0.9,
                    lintel: 2.0,
                    kind: DoorKind::Closed,
                    recess: 0.04,
                },
            ],
            furniture: vec![
                // desk against the south wall
                FurnitureBox {
                    min: Point3::new(2.6, 0.15, 0.0),
                    size: Point3::new(1.2, 0.6, 0.75),
                },
                // cabinet against the east wall
                FurnitureBox {
                    min: Point3::new(5.35, 1.5, 0.0),
                    size: Point3::new(0.5, 0.8, 1.4),
                },
                // low sofa against the west wall
                FurnitureBox {
                    min: Point3::new(0.15, 1.2, 0.0),
                    size: Point3::new(0.8, 1.5, 0.5),
                },
            ],
            ceiling_height: h,
        }
    }
}

/// Vertical scanner model. Beam angles (from the spin axis) are spread
/// uniformly over `fov_deg` centered on 90°.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSpec {
    pub n_beams: usize,
    pub fov_deg: f64,
    pub azimuth_steps: usize,
    pub max_range: f64,
    pub range_noise: f64,
    pub mount: Pose,
}

/// Sensor spin axis along robot +x; sensor +x points up and sensor +z left.
pub fn vertical_mount(height: f64) -> Pose {
    let m = Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0);
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    Pose::from_rotation(Point3::new(0.0, 0.0, height), rot, 0.0)
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            n_beams: 32,
            fov_deg: 30.0,
            azimuth_steps: 1024,
            max_range: 30.0,
            range_noise: 0.0,
            mount: vertical_mount(1.2),
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_beams == 0 || self.azimuth_steps == 0 {
            return Err(Error::InvalidConfig("sensor needs at least one beam and one step".into()));
        }
        if !(self.range_noise >= 0.0) || !(self.max_range > 0.0) {
            return Err(Error::InvalidConfig("invalid sensor noise or range".into()));
        }
        Ok(())
    }

    /// Beam angle of ring `r`, ascending with ring index.
    pub fn beam_angle(&self, r: usize) -> f64 {
        let center = PI / 2.0;
        if self.n_beams == 1 {
            return center;
        }
        let fov = self.fov_deg.to_radians();
        center - fov / 2.0 + fov * r as f64 / (self.n_beams - 1) as f64
    }
}

/// One simulated frame with per-point ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedFrame {
    pub scan: OrganizedScan,
    pub truth: Vec<Label>,
    pub surfaces: Vec<SurfaceId>,
    /// Pose of the robot in the world.
    pub pose: Pose,
}

/// Casts every (ring, azimuth) ray of one revolution from `pose`.
pub fn simulate_frame(scene: &SceneSpec, sensor: &SensorSpec, pose: &Pose, seed: u64) -> Result<SimulatedFrame> {
    let rects = build_geometry(scene);
    simulate_with(&rects, scene, sensor, pose, seed)
}

fn simulate_with(
    rects: &[Rect],
    scene: &SceneSpec,
    sensor: &SensorSpec,
    pose: &Pose,
    seed: u64,
) -> Result<SimulatedFrame> {
    sensor.validate()?;
    let world_sensor = pose.compose(&sensor.mount);
    let origin = world_sensor.translation;
    if scene.is_inside_geometry(&origin) {
        return Err(Error::PoseInsideGeometry);
    }
    let noise = if sensor.range_noise > 0.0 {
        Some(Normal::new(0.0, sensor.range_noise).expect("valid sigma"))
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut truth = Vec::new();
    let mut surfaces = Vec::new();
    for k in 0..sensor.azimuth_steps {
        let phi = 2.0 * PI * k as f64 / sensor.azimuth_steps as f64;
        let (sp, cp) = phi.sin_cos();
        for r in 0..sensor.n_beams {
            let a = sensor.beam_angle(r);
            let (sa, ca) = a.sin_cos();
            let dir_s = Point3::new(sa * cp, ca, sa * sp);
            let dir_w = world_sensor.rotate(&dir_s);
            let Some((t, idx)) = cast(rects, &origin, &dir_w, sensor.max_range) else {
                continue;
            };
            let range = match &noise {
                Some(n) => (t + n.sample(&mut rng)).max(1e-3),
                None => t,
            };
            points.push(RawPoint {
                position: dir_s * range,
                ring: r as u16,
            });
            truth.push(rects[idx].surface.label());
            surfaces.push(rects[idx].surface);
        }
    }
    Ok(SimulatedFrame {
        scan: OrganizedScan {
            points,
            n_beams: sensor.n_beams,
            sensor_to_robot: sensor.mount,
            timestamp: pose.timestamp,
        },
        truth,
        surfaces,
        pose: *pose,
    })
}

/// A timed planar robot pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

/// Poses every `1/frame_rate` seconds from the first waypoint to the last,
/// linearly interpolated between waypoints in position and heading.
pub fn poses_through(waypoints: &[Waypoint], frame_rate: f64) -> Vec<Pose> {
    let (Some(first), Some(last)) = (waypoints.first(), waypoints.last()) else {
        return Vec::new();
    };
    if !(frame_rate > 0.0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = first.t + k as f64 / frame_rate;
        if t > last.t + 1e-9 {
            break;
        }
        let seg = waypoints
            .windows(2)
            .find(|w| t <= w[1].t + 1e-9)
            .unwrap_or(&waypoints[waypoints.len().saturating_sub(2)..]);
        let (a, b) = if seg.len() == 2 { (seg[0], seg[1]) } else { (seg[0], seg[0]) };
        let s = if b.t > a.t { ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0) } else { 0.0 };
        out.push(Pose::planar(
            a.x + (b.x - a.x) * s,
            a.y + (b.y - a.y) * s,
            a.yaw + (b.yaw - a.yaw) * s,
            t,
        ));
        k += 1;
    }
    out
}

pub fn frame_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulates one frame per tick along the waypoints.
pub fn trajectory_through(
    scene: &SceneSpec,
    sensor: &SensorSpec,
    waypoints: &[Waypoint],
    frame_rate: f64,
    seed: u64,
) -> Result<Vec<SimulatedFrame>> {
    let rects = build_geometry(scene);
    poses_through(waypoints, frame_rate)
        .iter()
        .enumerate()
        .map(|(i, p)| simulate_with(&rects, scene, sensor, p, frame_seed(seed, i)))
        .collect()
}

/// 40-frame sweep: along the corridor, through the open door, around the room.
pub fn standard_path() -> Vec<Waypoint> {
    let wp = |t: f64, x: f64, y: f64, yaw: f64| Waypoint { t, x, y, yaw };
    vec![
        wp(0.0, 8.8, 6.0, PI),
        wp(13.0, 1.95, 6.0, PI),
        wp(15.0, 1.95, 6.0, 1.5 * PI),
        wp(21.0, 1.95, 2.3, 1.5 * PI),
        wp(23.0, 1.95, 2.3, 2.0 * PI),
        wp(39.0, 4.6, 2.3, 2.0 * PI),
    ]
}

/// Standard scene, sensor and path bundled as a scenario.
pub fn standard_scenario() -> scene_file::Scenario {
    scene_file::Scenario {
        scene: SceneSpec::standard(),
        sensor: SensorSpec::default(),
        waypoints: standard_path(),
        frame_rate: 1.0,
        seed: 7,
    }
}
