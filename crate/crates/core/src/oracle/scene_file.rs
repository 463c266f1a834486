//! Plain-text scenario files, one record per line:
//!
//! ```text
//! ceiling 2.7
//! wall x0 y0 x1 y1 height thickness
//! door wall offset width lintel open|closed recess
//! box x y z sx sy sz
//! sensor n_beams fov_deg azimuth_steps max_range range_noise mount_height
//! waypoint t x y yaw_deg
//! rate hz
//! seed n
//! ```
//!
//! `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::labeling::DoorKind;

use super::{vertical_mount, DoorSpec, FurnitureBox, SceneSpec, SensorSpec, Waypoint, WallSegment};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scene: SceneSpec,
    pub sensor: SensorSpec,
    pub waypoints: Vec<Waypoint>,
    pub frame_rate: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Scenario> {
        let mut scene = SceneSpec {
            walls: vec![],
            doors: vec![],
            furniture: vec![],
            ceiling_height: 0.0,
        };
        let mut sensor = SensorSpec::default();
        let mut waypoints = Vec::new();
        let mut frame_rate = 1.0;
        let mut seed = 0;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or("");
            let fields: Vec<&str> = it.collect();
            let err = |m: &str| Error::parse(path, lineno, m);
            let nums = |n: usize| -> Result<Vec<f64>> {
                if fields.len() != n {
                    return Err(err(&format!("`{key}` expects {n} fields, got {}", fields.len())));
                }
                fields
                    .iter()
                    .map(|f| f.parse::<f64>().map_err(|_| err(&format!("bad number `{f}`"))))
                    .collect()
            };
            match key {
                "ceiling" => scene.ceiling_height = nums(1)?[0],
                "wall" => {
                    let v = nums(6)?;
                    scene.walls.push(WallSegment {
                        start: (v[0], v[1]),
                        end: (v[2], v[3]),
                        height: v[4],
                        thickness: v[5],
                    });
                }
                "door" => {
                    if fields.len() != 6 {
                        return Err(err("`door` expects 6 fields"));
                    }
                    let kind = match fields[4] {
                        "open" => DoorKind::Open,
                        "closed" => DoorKind::Closed,
                        other => return Err(err(&format!("unknown door kind `{other}`"))),
                    };
                    let f = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("bad number `{s}`")));
                    scene.doors.push(DoorSpec {
                        wall: fields[0].parse().map_err(|_| err("bad wall index"))?,
                        offset: f(fields[1])?,
                        width: f(fields[2])?,
                        lintel: f(fields[3])?,
                        kind,
                        recess: f(fields[5])?,
                    });
                }
                "box" => {
                    let v = nums(6)?;
                    scene.furniture.push(FurnitureBox {
                        min: Point3::new(v[0], v[1], v[2]),
                        size: Point3::new(v[3], v[4], v[5]),
                    });
                }
                "sensor" => {
                    let v = nums(6)?;
                    if v[0] < 1.0 || v[2] < 1.0 || v[0].fract() != 0.0 || v[2].fract() != 0.0 {
                        return Err(err("beam and step counts must be positive integers"));
                    }
                    sensor = SensorSpec {
                        n_beams: v[0] as usize,
                        fov_deg: v[1],
                        azimuth_steps: v[2] as usize,
                        max_range: v[3],
                        range_noise: v[4],
                        mount: vertical_mount(v[5]),
                    };
                }
                "waypoint" => {
                    let v = nums(4)?;
                    waypoints.push(Waypoint {
                        t: v[0],
                        x: v[1],
                        y: v[2],
                        yaw: v[3].to_radians(),
                    });
                }
                "rate" => frame_rate = nums(1)?[0],
                "seed" => {
                    if fields.len() != 1 {
                        return Err(err("`seed` expects 1 field"));
                    }
                    seed = fields[0].parse().map_err(|_| err("bad seed"))?;
                }
                other => return Err(err(&format!("unknown record `{other}`"))),
            }
        }
        if waypoints.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidConfig("waypoint times must increase".into()));
        }
        scene.validate()?;
        sensor.validate()?;
        Ok(Scenario {
            scene,
            sensor,
            waypoints,
            frame_rate,
            seed,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let sc = &self.scene;
        writeln!(s, "ceiling {}", sc.ceiling_height).unwrap();
        for w in &sc.walls {
            writeln!(
                s,
                "wall {} {} {} {} {} {}",
                w.start.0, w.start.1, w.end.0, w.end.1, w.height, w.thickness
            )
            .unwrap();
        }
        for d in &sc.doors {
            let kind = match d.kind {
                DoorKind::Open => "open",
                DoorKind::Closed => "closed",
            };
            writeln!(s, "door {} {} {} {} {} {}", d.wall, d.offset, d.width, d.lintel, kind, d.recess).unwrap();
        }
        for b in &sc.furniture {
            writeln!(
                s,
                "box {} {} {} {} {} {}",
                b.min.x, b.min.y, b.min.z, b.size.x, b.size.y, b.size.z
            )
            .unwrap();
        }
        let se = &self.sensor;
        writeln!(
            s,
            "sensor {} {} {} {} {} {}",
            se.n_beams, se.fov_deg, se.azimuth_steps, se.max_range, se.range_noise, se.mount.translation.z
        )
        .unwrap();
        for w in &self.waypoints {
            writeln!(s, "waypoint {} {} {} {}", w.t, w.x, w.y, w.yaw.to_degrees()).unwrap();
        }
        writeln!(s, "rate {}", self.frame_rate).unwrap();
        writeln!(s, "seed {}", self.seed).unwrap();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_standard() {
        let sc = super::super::standard_scenario();
        let text = sc.to_text();
        let back = Scenario::parse(&text, Path::new("mem")).unwrap();
        assert_eq!(back.scene, sc.scene);
        assert_eq!(back.waypoints.len(), sc.waypoints.len());
        for (a, b) in back.waypoints.iter().zip(&sc.waypoints) {
            assert!((a.yaw - b.yaw).abs() < 1e-12);
        }
        assert_eq!(back.seed, sc.seed);
    }

    #[test]
    fn reports_line_numbers() {
        let e = Scenario::parse("ceiling 2.7\nwall 0 0 1\n", Path::new("s.txt")).unwrap_err();
        assert!(e.to_string().contains('2'), "{e}");
        assert!(Scenario::parse("bogus 1\n", Path::new("s.txt")).is_err());
    }
}
