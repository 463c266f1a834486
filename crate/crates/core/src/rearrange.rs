//! Per-frame preprocessing: floor and ceiling removal, and the split of the
//! remaining returns into half-ring point lines of fixed length.
//!
//! Beam angles and azimuths are evaluated in the raw sensor frame, whose spin
//! axis is sensor `y`. Everything else runs in the gravity-aligned robot frame.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{PlaneModel, Point3, Pose};

/// One return in the raw sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPoint {
    pub position: Point3,
    pub ring: u16,
}

/// A vertical-lidar frame with per-point emitter indices.
#[derive(Debug, Clone, PartialEq)]
pub struct OrganizedScan {
    pub points: Vec<RawPoint>,
    pub n_beams: usize,
    /// Extrinsic taking sensor coordinates into the gravity-aligned robot frame.
    pub sensor_to_robot: Pose,
    pub timestamp: f64,
}

impl OrganizedScan {
    pub fn robot_points(&self) -> Vec<Point3> {
        self.points
            .iter()
            .map(|p| self.sensor_to_robot.transform_point(&p.position))
            .collect()
    }
}

/// An ordered half-ring of returns, topmost first.
///
/// `sources` holds, for every entry of `points`, the index of the return in the
/// frame it came from. After resampling, indices repeat when points do.
#[derive(Debug, Clone, PartialEq)]
pub struct PointLine {
    pub ring: u16,
    pub side: u8,
    pub beam_angle: f64,
    pub points: Vec<Point3>,
    pub sources: Vec<usize>,
}

impl PointLine {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Splits point indices into `(floor, rest)` by a height filter.
pub fn remove_floor(points: &[Point3], z_floor: f64) -> (Vec<usize>, Vec<usize>) {
    (0..points.len()).partition(|&i| points[i].z <= z_floor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeilingParams {
    pub angle_tol_deg: f64,
    pub dist_tol: f64,
    pub min_height: f64,
    pub iterations: usize,
    pub min_inlier_frac: f64,
}

impl Default for CeilingParams {
    fn default() -> Self {
        Self {
            angle_tol_deg: 10.0,
            dist_tol: 0.05,
            min_height: 1.5,
            iterations: 200,
            min_inlier_frac: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeilingSplit {
    /// Normal oriented toward +z.
    pub plane: PlaneModel,
    pub ceiling: Vec<usize>,
    pub remainder: Vec<usize>,
}

impl CeilingSplit {
    /// Height of the plane above the robot origin.
    pub fn height(&self) -> f64 {
        -self.plane.d / self.plane.normal.z
    }
}

/// RANSAC search for the largest near-horizontal plane above `min_height`
/// among the points selected by `candidates`.
pub fn extract_ceiling(
    points: &[Point3],
    candidates: &[usize],
    params: &CeilingParams,
    seed: u64,
) -> Result<CeilingSplit> {
    let pool: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&i| points[i].z > params.min_height)
        .collect();
    if pool.len() < 3 {
        return Err(Error::NoCeilingFound);
    }
    let cos_tol = params.angle_tol_deg.to_radians().cos();
    let count_inliers = |pl: &PlaneModel| {
        candidates
            .iter()
            .filter(|&&i| pl.distance(&points[i]).abs() <= params.dist_tol)
            .count()
    };
    let acceptable = |pl: &PlaneModel, at: &Point3| {
        if pl.normal.z < cos_tol {
            return false;
        }
        // height of the plane directly above/below the sample centroid
        let z = at.z - pl.distance(at) / pl.normal.z;
        z > params.min_height
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(PlaneModel, usize)> = None;
    for _ in 0..params.iterations {
        let a = points[pool[rng.gen_range(0..pool.len())]];
        let b = points[pool[rng.gen_range(0..pool.len())]];
        let c = points[pool[rng.gen_range(0..pool.len())]];
        let n = (b - a).cross(&(c - a));
        if n.norm() < 1e-9 {
            continue;
        }
        let mut pl = PlaneModel::through_point(n, &a);
        if pl.normal.z < 0.0 {
            pl = pl.flipped();
        }
        let centroid = (a + b + c) * (1.0 / 3.0);
        if !acceptable(&pl, &centroid) {
            continue;
        }
        let count = count_inliers(&pl);
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((pl, count));
        }
    }
    let (mut plane, count) = best.ok_or(Error::NoCeilingFound)?;
    let needed = (params.min_inlier_frac * candidates.len() as f64).ceil() as usize;
    if count < needed.max(3) {
        return Err(Error::NoCeilingFound);
    }

    let inliers: Vec<Point3> = candidates
        .iter()
        .map(|&i| points[i])
        .filter(|p| plane.distance(p).abs() <= params.dist_tol)
        .collect();
    if let Ok(mut refined) = PlaneModel::fit_least_squares(&inliers) {
        if refined.normal.z < 0.0 {
            refined = refined.flipped();
        }
        let c = inliers.iter().fold(Point3::ORIGIN, |s, p| s + *p) * (1.0 / inliers.len() as f64);
        if acceptable(&refined, &c) && count_inliers(&refined) >= count {
            plane = refined;
        }
    }

    let (ceiling, remainder): (Vec<usize>, Vec<usize>) = candidates
        .iter()
        .partition(|&&i| plane.distance(&points[i]).abs() <= params.dist_tol);
    plane.inlier_count = ceiling.len();
    Ok(CeilingSplit {
        plane,
        ceiling,
        remainder,
    })
}

/// Angle between the return and the spin axis (sensor `y`), in [0, π].
pub fn beam_angle(p: &Point3) -> Result<f64> {
    if p.norm() == 0.0 {
        return Err(Error::ZeroRange);
    }
    Ok(p.x.hypot(p.z).atan2(p.y))
}

/// Azimuth about the spin axis, `atan2(z, x)` in the sensor frame.
pub fn sensor_azimuth(p: &Point3) -> f64 {
    p.z.atan2(p.x)
}

/// Azimuth of the robot's up direction as seen in the sensor frame. Half-rings
/// are split at this azimuth and its opposite so each line runs from the top of
/// the sweep to the bottom. Falls back to 0 when the spin axis is vertical.
pub fn up_azimuth(sensor_to_robot: &Pose) -> f64 {
    let up = sensor_to_robot.inverse().rotate(&Point3::new(0.0, 0.0, 1.0));
    if up.x.hypot(up.z) < 1e-9 {
        0.0
    } else {
        sensor_azimuth(&up)
    }
}

/// Side (0 or 1) and the sweep position from the top in (0, π] or [0, π).
fn sweep_position(phi: f64, phi_up: f64) -> (u8, f64) {
    let theta = (phi - phi_up).rem_euclid(TAU);
    if theta < PI {
        (0, theta)
    } else {
        (1, TAU - theta)
    }
}

/// Groups the returns selected by `keep` into half-ring lines ordered by
/// `(side, ring)`. Within a line, points run from the top of the sweep down;
/// on any single vertical surface this is descending z.
pub fn partition_into_lines(scan: &OrganizedScan, robot: &[Point3], keep: &[usize]) -> Vec<PointLine> {
    let phi_up = up_azimuth(&scan.sensor_to_robot);
    let n = scan.n_beams.max(1);
    let mut buckets: Vec<Vec<(f64, usize)>> = vec![Vec::new(); 2 * n];
    let mut angle_sum = vec![0.0f64; 2 * n];
    for &i in keep {
        let raw = &scan.points[i];
        let ring = (raw.ring as usize).min(n - 1);
        let (side, pos) = sweep_position(sensor_azimuth(&raw.position), phi_up);
        let slot = side as usize * n + ring;
        buckets[slot].push((pos, i));
        angle_sum[slot] += beam_angle(&raw.position).unwrap_or(0.0);
    }
    let mut lines = Vec::new();
    for (slot, mut entries) in buckets.into_iter().enumerate() {
        if entries.is_empty() {
            continue;
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let beam_angle = angle_sum[slot] / entries.len() as f64;
        lines.push(PointLine {
            ring: (slot % n) as u16,
            side: (slot / n) as u8,
            beam_angle,
            points: entries.iter().map(|&(_, i)| robot[i]).collect(),
            sources: entries.iter().map(|&(_, i)| i).collect(),
        });
    }
    lines
}

/// Picks exactly `target` entries at uniform ordinal positions along the line.
/// Short lines repeat entries.
pub fn resample_line(line: &PointLine, target: usize) -> Result<PointLine> {
    let n = line.len();
    if n == 0 {
        return Err(Error::EmptyLine);
    }
    let pick: Vec<usize> = (0..target).map(|k| k * n / target).collect();
    Ok(PointLine {
        ring: line.ring,
        side: line.side,
        beam_angle: line.beam_angle,
        points: pick.iter().map(|&j| line.points[j]).collect(),
        sources: pick.iter().map(|&j| line.sources[j]).collect(),
    })
}

/// Recovers ring indices from beam angles with 1-D k-means seeded at uniform
/// angles. Rings are numbered by ascending cluster angle.
pub fn recover_rings(angles: &[f64], n_beams: usize) -> Vec<u16> {
    if angles.is_empty() || n_beams == 0 {
        return vec![0; angles.len()];
    }
    let lo = angles.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = angles.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k = n_beams;
    let mut centers: Vec<f64> = if k == 1 {
        vec![(lo + hi) / 2.0]
    } else {
        (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
    };
    let mut assign = vec![0usize; angles.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (a, slot) in angles.iter().zip(assign.iter_mut()) {
            let best = nearest_center(&centers, *a);
            if best != *slot {
                *slot = best;
                changed = true;
            }
        }
        let mut sum = vec![0.0; k];
        let mut cnt = vec![0usize; k];
        for (a, &s) in angles.iter().zip(&assign) {
            sum[s] += a;
            cnt[s] += 1;
        }
        for c in 0..k {
            if cnt[c] > 0 {
                centers[c] = sum[c] / cnt[c] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
    let mut rank = vec![0u16; k];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r as u16;
    }
    angles.iter().map(|a| rank[nearest_center(&centers, *a)]).collect()
}

fn nearest_center(centers: &[f64], a: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = (a - c).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn floor_split_examples() {
        let pts: Vec<Point3> = [0.02, 0.05, 1.5].iter().map(|&z| Point3::new(1.0, 0.0, z)).collect();
        let (floor, rest) = remove_floor(&pts, 0.1);
        assert_eq!(floor, vec![0, 1]);
        assert_eq!(rest, vec![2]);

        let high: Vec<Point3> = (0..5).map(|i| Point3::new(0.0, 0.0, 1.0 + i as f64)).collect();
        assert!(remove_floor(&high, 0.1).0.is_empty());
        let (f, r) = remove_floor(&[], 0.1);
        assert!(f.is_empty() && r.is_empty());
    }

    #[test]
    fn beam_angle_examples() {
        assert_eq!(beam_angle(&Point3::new(0.0, 1.0, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(beam_angle(&Point3::new(1.0, 0.0, 0.0)).unwrap(), PI / 2.0);
        assert_abs_diff_eq!(beam_angle(&Point3::new(1.0, 1.0, 0.0)).unwrap(), FRAC_PI_4);
        assert!(matches!(beam_angle(&Point3::ORIGIN), Err(Error::ZeroRange)));
    }

    fn line_of(n: usize) -> PointLine {
        PointLine {
            ring: 3,
            side: 1,
            beam_angle: 1.5,
            points: (0..n).map(|i| Point3::new(1.0, 0.0, 3.0 - i as f64 * 0.01)).collect(),
            sources: (0..n).collect(),
        }
    }

    #[test]
    fn resample_examples() {
        let r = resample_line(&line_of(400), 200).unwrap();
        assert_eq!(r.len(), 200);
        assert!(r.sources.iter().enumerate().all(|(k, &s)| s == 2 * k));

        let same = line_of(200);
        assert_eq!(resample_line(&same, 200).unwrap(), same);

        let r = resample_line(&line_of(50), 200).unwrap();
        assert_eq!(r.len(), 200);
        for s in 0..50 {
            assert_eq!(r.sources.iter().filter(|&&x| x == s).count(), 4);
        }
        assert!(r.points.windows(2).all(|w| w[0].z >= w[1].z));

        let empty = line_of(0);
        assert!(matches!(resample_line(&empty, 200), Err(Error::EmptyLine)));
    }

    #[test]
    fn ceiling_requires_points_above_min_height() {
        let pts: Vec<Point3> = (0..100)
            .map(|i| Point3::new(i as f64 * 0.1, (i % 7) as f64 * 0.1, 1.0))
            .collect();
        let all: Vec<usize> = (0..pts.len()).collect();
        assert!(matches!(
            extract_ceiling(&pts, &all, &CeilingParams::default(), 1),
            Err(Error::NoCeilingFound)
        ));
    }

    #[test]
    fn ceiling_on_flat_patch() {
        let mut pts = Vec::new();
        for i in 0..30 {
            for j in 0..30 {
                pts.push(Point3::new(i as f64 * 0.1, j as f64 * 0.1, 3.0));
            }
        }
        for i in 0..200 {
            pts.push(Point3::new(2.0, i as f64 * 0.01, 0.2 + i as f64 * 0.01));
        }
        let all: Vec<usize> = (0..pts.len()).collect();
        let split = extract_ceiling(&pts, &all, &CeilingParams::default(), 7).unwrap();
        assert_eq!(split.ceiling.len(), 900);
        assert_abs_diff_eq!(split.height(), 3.0, epsilon = 1e-9);
        assert_eq!(split.ceiling.len() + split.remainder.len(), pts.len());
    }

    #[test]
    fn ring_recovery_clusters_angles() {
        let mut angles = Vec::new();
        let mut truth = Vec::new();
        for r in 0..8u16 {
            for k in 0..20 {
                angles.push(1.2 + r as f64 * 0.05 + (k as f64 - 10.0) * 1e-4);
                truth.push(r);
            }
        }
        assert_eq!(recover_rings(&angles, 8), truth);
    }

    #[test]
    fn sweep_sides_split_at_up_direction() {
        assert_eq!(sweep_position(0.1, 0.0).0, 0);
        assert_eq!(sweep_position(PI / 2.0, 0.0), (0, PI / 2.0));
        let (side, pos) = sweep_position(-PI / 2.0, 0.0);
        assert_eq!(side, 1);
        assert_abs_diff_eq!(pos, PI / 2.0, epsilon = 1e-12);
    }
}
