//! Trajectory text: `timestamp tx ty tz qx qy qz qw` per line, `#` comments.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, Pose};
use crate::map::Trajectory;

use super::ply::write_file;

pub fn parse_trajectory(text: &str, path: &Path) -> Result<Trajectory> {
    let mut poses = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, i + 1, "non-numeric field"))?;
        if v.len() != 8 {
            return Err(Error::parse(path, i + 1, format!("expected 8 fields, got {}", v.len())));
        }
        let pose = Pose::new(Point3::new(v[1], v[2], v[3]), [v[7], v[4], v[5], v[6]], v[0])
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        poses.push(pose);
    }
    Trajectory::new(poses).map_err(|e| Error::parse(path, 1, e.to_string()))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text, path)
}

pub fn format_trajectory(poses: &[Pose]) -> String {
    let mut s = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for p in poses {
        let [w, x, y, z] = p.wxyz();
        let t = p.translation;
        writeln!(s, "{} {} {} {} {} {} {} {}", p.timestamp, t.x, t.y, t.z, x, y, z, w).unwrap();
    }
    s
}

pub fn write_trajectory(path: &Path, poses: &[Pose]) -> Result<()> {
    write_file(path, format_trajectory(poses).as_bytes())
}
