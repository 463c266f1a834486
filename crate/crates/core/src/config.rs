//! Pipeline parameters, loadable from `key = value` files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::labeling::{DoorParams, LabelParams};
use crate::map::SliceParams;
use crate::rearrange::CeilingParams;
use crate::walls::WallParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub z_floor: f64,
    pub dist_tol: f64,
    pub angle_tol: f64,
    pub min_height: f64,
    pub ceiling_iterations: usize,
    pub ceiling_min_inlier_frac: f64,
    pub d_threshold: f64,
    pub min_points: usize,
    pub resample_count: usize,
    pub sigma_th: f64,
    pub min_lines_per_wall: usize,
    pub vertical_tol: f64,
    pub grow_iterations: usize,
    pub delta_door: f64,
    pub h_min: f64,
    pub recess_max: f64,
    pub door_outlier_frac: f64,
    pub wall_band: f64,
    pub extent_margin: f64,
    pub map_relabel: bool,
    pub resolution: f64,
    pub min_hits: usize,
    pub below_ceiling_top: f64,
    pub below_ceiling_bottom: f64,
    pub mid_half_width: f64,
    /// Input frames: beam count for ring recovery and sensor mount height.
    pub n_beams: usize,
    pub mount_height: f64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            z_floor: 0.1,
            dist_tol: 0.05,
            angle_tol: 10.0,
            min_height: 1.5,
            ceiling_iterations: 200,
            ceiling_min_inlier_frac: 0.05,
            d_threshold: 0.3,
            min_points: 10,
            resample_count: 200,
            sigma_th: 0.05,
            min_lines_per_wall: 3,
            vertical_tol: 10.0,
            grow_iterations: 100,
            delta_door: 0.02,
            h_min: 1.6,
            recess_max: 0.15,
            door_outlier_frac: 0.05,
            wall_band: 0.08,
            extent_margin: 0.3,
            map_relabel: true,
            resolution: 0.05,
            min_hits: 3,
            below_ceiling_top: 0.5,
            below_ceiling_bottom: 0.6,
            mid_half_width: 0.1,
            n_beams: 32,
            mount_height: 1.2,
            seed: 0,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Config> {
        let mut c = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::parse(path, i + 1, "expected `key = value`"));
            };
            c.set(k.trim(), v.trim()).map_err(|m| Error::parse(path, i + 1, m))?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Every parameter as `key = value`, in [`Config::parse`] syntax.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("z_floor", self.z_floor.to_string()),
            ("dist_tol", self.dist_tol.to_string()),
            ("angle_tol", self.angle_tol.to_string()),
            ("min_height", self.min_height.to_string()),
            ("ceiling_iterations", self.ceiling_iterations.to_string()),
            ("ceiling_min_inlier_frac", self.ceiling_min_inlier_frac.to_string()),
            ("d_threshold", self.d_threshold.to_string()),
            ("min_points", self.min_points.to_string()),
            ("resample_count", self.resample_count.to_string()),
            ("sigma_th", self.sigma_th.to_string()),
            ("min_lines_per_wall", self.min_lines_per_wall.to_string()),
            ("vertical_tol", self.vertical_tol.to_string()),
            ("grow_iterations", self.grow_iterations.to_string()),
            ("delta_door", self.delta_door.to_string()),
            ("h_min", self.h_min.to_string()),
            ("recess_max", self.recess_max.to_string()),
            ("door_outlier_frac", self.door_outlier_frac.to_string()),
            ("wall_band", self.wall_band.to_string()),
            ("extent_margin", self.extent_margin.to_string()),
            ("map_relabel", self.map_relabel.to_string()),
            ("resolution", self.resolution.to_string()),
            ("min_hits", self.min_hits.to_string()),
            ("below_ceiling_top", self.below_ceiling_top.to_string()),
            ("below_ceiling_bottom", self.below_ceiling_bottom.to_string()),
            ("mid_half_width", self.mid_half_width.to_string()),
            ("n_beams", self.n_beams.to_string()),
            ("mount_height", self.mount_height.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    /// Sets one parameter by name.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn f(v: &str) -> std::result::Result<f64, String> {
            v.parse().map_err(|_| format!("bad number `{v}`"))
        }
        fn u(v: &str) -> std::result::Result<usize, String> {
            v.parse().map_err(|_| format!("bad count `{v}`"))
        }
        match key {
            "z_floor" => self.z_floor = f(value)?,
            "dist_tol" => self.dist_tol = f(value)?,
            "angle_tol" => self.angle_tol = f(value)?,
            "min_height" => self.min_height = f(value)?,
            "ceiling_iterations" => self.ceiling_iterations = u(value)?,
            "ceiling_min_inlier_frac" => self.ceiling_min_inlier_frac = f(value)?,
            "d_threshold" => self.d_threshold = f(value)?,
            "min_points" => self.min_points = u(value)?,
            "resample_count" => self.resample_count = u(value)?,
            "sigma_th" => self.sigma_th = f(value)?,
            "min_lines_per_wall" => self.min_lines_per_wall = u(value)?,
            "vertical_tol" => self.vertical_tol = f(value)?,
            "grow_iterations" => self.grow_iterations = u(value)?,
            "delta_door" => self.delta_door = f(value)?,
            "h_min" => self.h_min = f(value)?,
            "recess_max" => self.recess_max = f(value)?,
            "door_outlier_frac" => self.door_outlier_frac = f(value)?,
            "wall_band" => self.wall_band = f(value)?,
            "extent_margin" => self.extent_margin = f(value)?,
            "map_relabel" => self.map_relabel = value.parse().map_err(|_| format!("bad flag `{value}`"))?,
            "resolution" => self.resolution = f(value)?,
            "min_hits" => self.min_hits = u(value)?,
            "below_ceiling_top" => self.below_ceiling_top = f(value)?,
            "below_ceiling_bottom" => self.below_ceiling_bottom = f(value)?,
            "mid_half_width" => self.mid_half_width = f(value)?,
            "n_beams" => self.n_beams = u(value)?,
            "mount_height" => self.mount_height = f(value)?,
            "seed" => self.seed = value.parse().map_err(|_| format!("bad seed `{value}`"))?,
            _ => return Err(format!("unknown parameter `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.resample_count < 2 {
            return bad("resample_count must be at least 2");
        }
        if self.resample_count < self.min_points {
            return bad("resample_count must be at least min_points");
        }
        if self.min_points == 0 || self.min_lines_per_wall == 0 || self.min_hits == 0 || self.n_beams == 0 {
            return bad("counts must be positive");
        }
        if !(self.resolution > 0.0) {
            return bad("resolution must be positive");
        }
        for (name, v) in [
            ("dist_tol", self.dist_tol),
            ("d_threshold", self.d_threshold),
            ("sigma_th", self.sigma_th),
            ("wall_band", self.wall_band),
            ("delta_door", self.delta_door),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be non-negative")));
            }
        }
        if self.recess_max <= self.delta_door {
            return bad("recess_max must exceed delta_door");
        }
        if self.below_ceiling_bottom <= self.below_ceiling_top {
            return bad("below_ceiling_bottom must exceed below_ceiling_top");
        }
        Ok(())
    }

    pub fn ceiling(&self) -> CeilingParams {
        CeilingParams {
            angle_tol_deg: self.angle_tol,
            dist_tol: self.dist_tol,
            min_height: self.min_height,
            iterations: self.ceiling_iterations,
            min_inlier_frac: self.ceiling_min_inlier_frac,
        }
    }

    pub fn walls(&self) -> WallParams {
        WallParams {
            d_threshold: self.d_threshold,
            min_points: self.min_points,
            sigma_th: self.sigma_th,
            min_lines_per_wall: self.min_lines_per_wall,
            vertical_tol_deg: self.vertical_tol,
            ransac_iterations: self.grow_iterations,
        }
    }

    pub fn doors(&self) -> DoorParams {
        DoorParams {
            delta_door: self.delta_door,
            h_min: self.h_min,
            wall_band: self.wall_band,
            recess_max: self.recess_max,
            outlier_frac: self.door_outlier_frac,
            min_points: self.min_points,
        }
    }

    pub fn labels(&self) -> LabelParams {
        LabelParams {
            wall_band: self.wall_band,
            extent_margin: self.extent_margin,
            delta_door: self.delta_door,
            recess_max: self.recess_max,
        }
    }

    pub fn slices(&self) -> SliceParams {
        SliceParams {
            below_ceiling_top: self.below_ceiling_top,
            below_ceiling_bottom: self.below_ceiling_bottom,
            mid_half_width: self.mid_half_width,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cfg");
        std::fs::write(&p, "# tuned\nd_threshold = 2.5\nseed=9\n").unwrap();
        let c = Config::load(&p).unwrap();
        assert_eq!(c.d_threshold, 2.5);
        assert_eq!(c.seed, 9);
        assert_eq!(c.min_points, 10);
    }

    #[test]
    fn text_round_trip() {
        let mut c = Config::default();
        c.d_threshold = 1.0 / 3.0;
        c.seed = u64::MAX;
        c.map_relabel = false;
        assert_eq!(Config::parse(&c.to_text(), Path::new("c")).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_key() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.cfg");
        std::fs::write(&p, "a = 1\n").unwrap();
        let e = Config::load(&p).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }
}
