//! Wall candidates from forward differences along point lines, and the
//! sequential growing of coplanar candidates into wall planes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{CovarianceShape, PlaneModel, Point3};
use crate::rearrange::PointLine;

/// Height steps below this are treated as horizontal.
const MIN_DZ: f64 = 1e-6;

/// A run of near-vertical consecutive points in one line. Indices are
/// inclusive and `start_idx` is the topmost point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalSegment {
    pub line_id: usize,
    pub start_idx: usize,
    pub end_idx: usize,
    pub z_top: f64,
    pub z_bottom: f64,
}

impl VerticalSegment {
    pub fn len(&self) -> usize {
        self.end_idx - self.start_idx + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points<'a>(&self, line: &'a PointLine) -> &'a [Point3] {
        &line.points[self.start_idx..=self.end_idx]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WallPlane {
    /// Normal oriented toward the robot origin.
    pub model: PlaneModel,
    /// Sorted ids of the lines whose candidates built this plane.
    pub member_lines: Vec<usize>,
    pub member_points: Vec<Point3>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallParams {
    pub d_threshold: f64,
    pub min_points: usize,
    pub sigma_th: f64,
    pub min_lines_per_wall: usize,
    pub vertical_tol_deg: f64,
    pub ransac_iterations: usize,
}

impl Default for WallParams {
    fn default() -> Self {
        Self {
            d_threshold: 0.3,
            min_points: 10,
            sigma_th: 0.05,
            min_lines_per_wall: 3,
            vertical_tol_deg: 10.0,
            ransac_iterations: 100,
        }
    }
}

/// `|Δ horizontal range / Δz|` between consecutive points; `+∞` on flat steps.
pub fn forward_difference(points: &[Point3]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::LineTooShort(points.len()));
    }
    Ok(points
        .windows(2)
        .map(|w| {
            let dz = w[1].z - w[0].z;
            if dz.abs() < MIN_DZ {
                f64::INFINITY
            } else {
                ((w[1].horizontal_range() - w[0].horizontal_range()) / dz).abs()
            }
        })
        .collect())
}

/// Maximal runs of differences below `d_threshold` spanning at least
/// `min_points` distinct points, top to bottom. A repeated sample (from
/// duplicate-filling a short line) continues the run it sits in.
pub fn detect_vertical_structures(
    line_id: usize,
    points: &[Point3],
    diffs: &[f64],
    d_threshold: f64,
    min_points: usize,
) -> Vec<VerticalSegment> {
    let repeat = |j: usize| points[j] == points[j + 1];
    let mut out = Vec::new();
    let mut j = 0;
    while j < diffs.len() {
        if diffs[j] >= d_threshold || repeat(j) {
            j += 1;
            continue;
        }
        let start = j;
        let mut distinct = 1;
        while j < diffs.len() && (diffs[j] < d_threshold || repeat(j)) {
            if !repeat(j) {
                distinct += 1;
            }
            j += 1;
        }
        // drop trailing repeats so the segment ends on its last accepted step
        let mut end = j;
        while end > start && repeat(end - 1) {
            end -= 1;
        }
        if distinct >= min_points {
            let seg = &points[start..=end];
            let z_top = seg.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
            let z_bottom = seg.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
            out.push(VerticalSegment {
                line_id,
                start_idx: start,
                end_idx: end,
                z_top,
                z_bottom,
            });
        }
    }
    out
}

/// The segment reaching highest; furniture rarely meets the ceiling.
pub fn select_wall_candidate(segments: &[VerticalSegment]) -> Option<VerticalSegment> {
    let mut best: Option<VerticalSegment> = None;
    for s in segments {
        if best.is_none_or(|b| s.z_top > b.z_top) {
            best = Some(*s);
        }
    }
    best
}

/// Wall candidate for one line, if any.
pub fn line_candidate(line_id: usize, line: &PointLine, params: &WallParams) -> Option<VerticalSegment> {
    let diffs = forward_difference(&line.points).ok()?;
    let segs = detect_vertical_structures(line_id, &line.points, &diffs, params.d_threshold, params.min_points);
    select_wall_candidate(&segs)
}

/// RANSAC over random triples followed by a least-squares refit on the inliers.
pub fn fit_plane_ransac(points: &[Point3], dist_tol: f64, iterations: usize, seed: u64) -> Result<PlaneModel> {
    let shape = CovarianceShape::of(points)?;
    if shape.is_collinear() {
        return Err(Error::DegenerateInput("points are collinear"));
    }
    let n = points.len();
    let count = |pl: &PlaneModel| points.iter().filter(|p| pl.distance(p).abs() <= dist_tol).count();

    let mut best: Option<(PlaneModel, usize)> = None;
    if n == 3 {
        let pl = PlaneModel::through_point((points[1] - points[0]).cross(&(points[2] - points[0])), &points[0]);
        best = Some((pl, 3));
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..iterations {
            let a = points[rng.gen_range(0..n)];
            let b = points[rng.gen_range(0..n)];
            let c = points[rng.gen_range(0..n)];
            let normal = (b - a).cross(&(c - a));
            let scale = (b - a).norm() * (c - a).norm();
            if scale == 0.0 || normal.norm() < 1e-6 * scale {
                continue;
            }
            let pl = PlaneModel::through_point(normal, &a);
            let k = count(&pl);
            if best.is_none_or(|(_, b)| k > b) {
                best = Some((pl, k));
            }
        }
    }
    // every sampled triple was degenerate: fall back to the global fit
    let (plane, _) = match best {
        Some(b) => b,
        None => (PlaneModel::through_point(shape.axes[0], &shape.centroid), 0),
    };

    let inliers: Vec<Point3> = points
        .iter()
        .copied()
        .filter(|p| plane.distance(p).abs() <= dist_tol)
        .collect();
    let mut refined = PlaneModel::fit_least_squares(&inliers).unwrap_or(plane);
    refined.inlier_count = count(&refined);
    Ok(refined)
}

/// Mean absolute point-to-plane distance.
pub fn line_plane_similarity(plane: &PlaneModel, points: &[Point3]) -> f64 {
    if points.is_empty() {
        return f64::INFINITY;
    }
    points.iter().map(|p| plane.distance(p).abs()).sum::<f64>() / points.len() as f64
}

/// Per-frame wall detection result.
#[derive(Debug, Clone, PartialEq)]
pub struct WallDetection {
    pub planes: Vec<WallPlane>,
    /// Wall candidate per input line.
    pub candidates: Vec<Option<VerticalSegment>>,
}

impl WallDetection {
    /// Index of the plane that line `line_id` joined.
    pub fn plane_of_line(&self, line_id: usize) -> Option<usize> {
        self.planes
            .iter()
            .position(|w| w.member_lines.binary_search(&line_id).is_ok())
    }
}

struct Growing {
    lines: Vec<usize>,
    points: Vec<Point3>,
    plane: Option<PlaneModel>,
}

impl Growing {
    fn seed(id: usize, pts: &[Point3]) -> Self {
        Growing {
            lines: vec![id],
            points: pts.to_vec(),
            plane: None,
        }
    }
}

fn line_seed(seed: u64, line: usize) -> u64 {
    seed ^ (line as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Grows wall planes over `lines`, which must be in spatial order.
pub fn grow_wall_planes(lines: &[PointLine], params: &WallParams, seed: u64) -> Vec<WallPlane> {
    detect_walls(lines, params, seed).planes
}

pub fn detect_walls(lines: &[PointLine], params: &WallParams, seed: u64) -> WallDetection {
    let candidates: Vec<Option<VerticalSegment>> = lines
        .iter()
        .enumerate()
        .map(|(i, l)| line_candidate(i, l, params))
        .collect();

    let sigma = params.sigma_th;
    let fit = |pts: &[Point3], id: usize| fit_plane_ransac(pts, sigma, params.ransac_iterations, line_seed(seed, id));
    let mut committed: Vec<Growing> = Vec::new();
    let mut current: Option<Growing> = None;

    for (id, cand) in candidates.iter().enumerate() {
        let Some(seg) = cand else { continue };
        let pts = seg.points(&lines[id]);
        let mut pending = true;
        while pending {
            pending = false;
            let Some(g) = current.as_mut() else {
                current = Some(Growing::seed(id, pts));
                break;
            };
            if g.plane.is_none() {
                g.plane = fit(&g.points, id).ok();
            }
            let accepted = match g.plane {
                Some(c) => line_plane_similarity(&c, pts) < sigma,
                None => {
                    // a lone vertical line does not define a plane; test the pair
                    let mut merged = g.points.clone();
                    merged.extend_from_slice(pts);
                    match fit(&merged, id) {
                        Ok(c) if line_plane_similarity(&c, &merged) < sigma => {
                            g.plane = Some(c);
                            true
                        }
                        _ => false,
                    }
                }
            };
            if accepted {
                g.lines.push(id);
                g.points.extend_from_slice(pts);
                if let Ok(c) = fit(&g.points, id) {
                    g.plane = Some(c);
                }
            } else {
                let done = current.take().expect("current plane");
                if done.lines.len() >= params.min_lines_per_wall {
                    committed.push(done);
                    current = Some(Growing::seed(id, pts));
                } else if done.lines.len() >= 2 {
                    // too short to keep: retry the rejected line against the
                    // most recent member instead of discarding both
                    let last = *done.lines.last().expect("non-empty");
                    let last_pts = candidates[last].expect("member has candidate").points(&lines[last]);
                    current = Some(Growing::seed(last, last_pts));
                    pending = true;
                } else {
                    current = Some(Growing::seed(id, pts));
                }
            }
        }
    }
    if let Some(g) = current {
        committed.push(g);
    }

    let max_nz = params.vertical_tol_deg.to_radians().sin();
    let planes = committed
        .into_iter()
        .filter(|g| g.lines.len() >= params.min_lines_per_wall)
        .filter_map(|g| {
            let model = PlaneModel::fit_least_squares(&g.points).ok()?;
            let model = model.oriented_toward(&Point3::ORIGIN);
            if model.normal.z.abs() > max_nz || line_plane_similarity(&model, &g.points) > sigma {
                return None;
            }
            let mut member_lines = g.lines;
            member_lines.sort_unstable();
            Some(WallPlane {
                model,
                member_lines,
                member_points: g.points,
            })
        })
        .collect();
    WallDetection { planes, candidates }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pts_from(rz: &[(f64, f64)]) -> Vec<Point3> {
        rz.iter().map(|&(r, z)| Point3::new(r, 0.0, z)).collect()
    }

    #[test]
    fn forward_difference_examples() {
        let wall: Vec<Point3> = (0..20).map(|i| Point3::new(0.6, 0.8, 2.5 - i as f64 * 0.1)).collect();
        assert!(forward_difference(&wall).unwrap().iter().all(|&d| d == 0.0));

        let d = forward_difference(&pts_from(&[(1.0, 1.0), (1.1, 0.999)])).unwrap();
        assert_abs_diff_eq!(d[0], 100.0, epsilon = 1e-6);

        let d = forward_difference(&pts_from(&[(1.0, 1.0), (1.5, 1.0)])).unwrap();
        assert_eq!(d[0], f64::INFINITY);

        assert!(matches!(forward_difference(&pts_from(&[(1.0, 1.0)])), Err(Error::LineTooShort(1))));
    }

    #[test]
    fn min_points_boundary() {
        // 9 compliant points: 8 small diffs, then a jump
        let mut rz: Vec<(f64, f64)> = (0..9).map(|i| (1.0, 2.0 - i as f64 * 0.01)).collect();
        rz.push((3.0, 1.9));
        rz.push((5.0, 1.89));
        let p = pts_from(&rz);
        let d = forward_difference(&p).unwrap();
        assert!(detect_vertical_structures(0, &p, &d, 0.3, 10).is_empty());
        let segs = detect_vertical_structures(0, &p, &d, 0.3, 9);
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].start_idx, segs[0].end_idx), (0, 8));

        rz.insert(0, (1.0, 2.01));
        let p = pts_from(&rz);
        let d = forward_difference(&p).unwrap();
        let segs = detect_vertical_structures(0, &p, &d, 0.3, 10);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].len(), 10);
    }

    #[test]
    fn all_diffs_above_threshold_gives_nothing() {
        let p = pts_from(&(0..30).map(|i| (1.0 + i as f64, 2.0 - i as f64 * 0.01)).collect::<Vec<_>>());
        let d = forward_difference(&p).unwrap();
        assert!(detect_vertical_structures(0, &p, &d, 0.3, 10).is_empty());
    }

    #[test]
    fn candidate_is_highest_segment() {
        let a = VerticalSegment { line_id: 0, start_idx: 0, end_idx: 20, z_top: 2.8, z_bottom: 2.0 };
        let b = VerticalSegment { line_id: 0, start_idx: 30, end_idx: 60, z_top: 1.0, z_bottom: 0.1 };
        assert_eq!(select_wall_candidate(&[b, a]), Some(a));
        assert_eq!(select_wall_candidate(&[b]), Some(b));
        assert_eq!(select_wall_candidate(&[]), None);
    }

    #[test]
    fn ransac_exact_three_points() {
        let p = [Point3::new(0.0, 0.0, 1.0), Point3::new(1.0, 0.2, 1.5), Point3::new(0.3, 1.0, 0.7)];
        let pl = fit_plane_ransac(&p, 0.01, 100, 3).unwrap();
        for q in &p {
            assert_abs_diff_eq!(pl.distance(q), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn ransac_rejects_collinear() {
        let p: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(fit_plane_ransac(&p, 0.02, 100, 1), Err(Error::DegenerateInput(_))));
        assert!(matches!(fit_plane_ransac(&p[..2], 0.02, 100, 1), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn similarity_examples() {
        let pl = PlaneModel::new(Point3::new(0.0, 1.0, 0.0), -2.0);
        let on: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, 2.0, 0.3 * i as f64)).collect();
        assert_eq!(line_plane_similarity(&pl, &on), 0.0);
        let off: Vec<Point3> = on.iter().map(|p| *p + Point3::new(0.0, 0.1, 0.0)).collect();
        assert_abs_diff_eq!(line_plane_similarity(&pl, &off), 0.1, epsilon = 1e-12);
    }

    fn vertical_line(x: f64, y: f64) -> PointLine {
        PointLine {
            ring: 0,
            side: 0,
            beam_angle: 1.57,
            points: (0..200).map(|i| Point3::new(x, y, 2.6 - i as f64 * 0.0125)).collect(),
            sources: (0..200).collect(),
        }
    }

    #[test]
    fn empty_input_gives_no_planes() {
        assert!(grow_wall_planes(&[], &WallParams::default(), 0).is_empty());
    }

    #[test]
    fn coplanar_lines_form_one_plane() {
        let lines: Vec<PointLine> = (0..10).map(|i| vertical_line(-1.0 + 0.2 * i as f64, 1.5)).collect();
        let planes = grow_wall_planes(&lines, &WallParams::default(), 4);
        assert_eq!(planes.len(), 1);
        assert_eq!(planes[0].member_lines, (0..10).collect::<Vec<_>>());
        assert_abs_diff_eq!(planes[0].model.normal.y, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(planes[0].model.d, 1.5, epsilon = 1e-9);
    }

    #[test]
    fn corner_splits_into_two_planes() {
        let mut lines: Vec<PointLine> = (0..6).map(|i| vertical_line(0.2 * i as f64, 1.5)).collect();
        lines.extend((0..6).map(|i| vertical_line(1.5, 1.2 - 0.2 * i as f64)));
        let planes = grow_wall_planes(&lines, &WallParams::default(), 4);
        assert_eq!(planes.len(), 2);
        assert!(planes[0].model.normal.y.abs() > 0.999);
        assert!(planes[1].model.normal.x.abs() > 0.999);
        assert_eq!(planes[0].member_lines.len() + planes[1].member_lines.len(), 12);
    }
}
