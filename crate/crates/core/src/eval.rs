//! Area-based precision, recall and F1 per label.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{CovarianceShape, Label, Point3};
use crate::labeling::LabeledCloud;

/// Default area bin edge in meters.
pub const AREA_CELL: f64 = 0.05;

/// Bin assignment shared by every subset of one point set. Space is split
/// into coarse buckets; each bucket projects its points onto the coordinate
/// plane most perpendicular to its local surface normal, at the bucket's mean
/// depth, and bins them there.
#[derive(Debug, Clone)]
pub struct SurfaceChart {
    cell: f64,
    keys: Vec<(u8, i64, i64, i64)>,
}

impl SurfaceChart {
    pub fn new(points: &[Point3], cell: f64) -> SurfaceChart {
        let coarse = 4.0 * cell;
        let bucket_of = |p: &Point3| {
            (
                (p.x / coarse).floor() as i64,
                (p.y / coarse).floor() as i64,
                (p.z / coarse).floor() as i64,
            )
        };
        let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(bucket_of(p)).or_default().push(i);
        }
        let mut keys = vec![(0u8, 0i64, 0i64, 0i64); points.len()];
        for members in buckets.values() {
            let mut sorted = members.clone();
            sorted.sort_unstable();
            let pts: Vec<Point3> = sorted.iter().map(|&i| points[i]).collect();
            let axis = match CovarianceShape::of(&pts) {
                Ok(shape) if !shape.is_collinear() => {
                    let n = shape.axes[0];
                    let a = [n.x.abs(), n.y.abs(), n.z.abs()];
                    if a[2] >= a[0] && a[2] >= a[1] {
                        2
                    } else if a[0] >= a[1] {
                        0
                    } else {
                        1
                    }
                }
                _ => 2,
            };
            let coord = |p: &Point3, k: usize| [p.x, p.y, p.z][k];
            let depth = pts.iter().map(|p| coord(p, axis)).sum::<f64>() / pts.len() as f64;
            let level = (depth / cell).round() as i64;
            let (ua, va) = match axis {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            for (&i, p) in sorted.iter().zip(&pts) {
                keys[i] = (
                    axis as u8,
                    level,
                    (coord(p, ua) / cell).floor() as i64,
                    (coord(p, va) / cell).floor() as i64,
                );
            }
        }
        SurfaceChart { cell, keys }
    }

    /// Area covered by the points at `indices`.
    pub fn area(&self, indices: impl IntoIterator<Item = usize>) -> f64 {
        let bins: HashSet<(u8, i64, i64, i64)> = indices.into_iter().map(|i| self.keys[i]).collect();
        bins.len() as f64 * self.cell * self.cell
    }
}

/// Surface area of a point set, binned at `cell`. Empty input has area 0.
pub fn surface_area(points: &[Point3], cell: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    SurfaceChart::new(points, cell).area(0..points.len())
}

/// Per-label scores. Ratios are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelMetrics {
    pub label: Label,
    pub tp_area: f64,
    pub fp_area: f64,
    pub fn_area: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl LabelMetrics {
    pub fn from_areas(label: Label, tp: f64, fp: f64, fn_: f64) -> LabelMetrics {
        let ratio = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        LabelMetrics {
            label,
            tp_area: tp,
            fp_area: fp,
            fn_area: fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Compares predicted against true labels over the same points. Positions
/// must agree within `match_tol`.
pub fn metrics(pred: &LabeledCloud, truth: &LabeledCloud, match_tol: f64) -> Result<Vec<LabelMetrics>> {
    metrics_with_cell(pred, truth, match_tol, AREA_CELL)
}

pub fn metrics_with_cell(pred: &LabeledCloud, truth: &LabeledCloud, match_tol: f64, cell: f64) -> Result<Vec<LabelMetrics>> {
    if pred.len() != truth.len() {
        return Err(Error::Mismatch(format!("{} predicted vs {} true points", pred.len(), truth.len())));
    }
    if let Some(i) = pred
        .points
        .iter()
        .zip(&truth.points)
        .position(|(a, b)| a.position.distance(&b.position) > match_tol)
    {
        return Err(Error::Mismatch(format!("point {i} differs by more than {match_tol}")));
    }
    let positions: Vec<Point3> = pred.points.iter().map(|p| p.position).collect();
    let chart = SurfaceChart::new(&positions, cell);
    let pairs: Vec<(Label, Label)> = pred.points.iter().zip(&truth.points).map(|(p, t)| (p.label, t.label)).collect();
    Ok(Label::ALL
        .iter()
        .map(|&l| {
            let sel = |f: &dyn Fn(Label, Label) -> bool| {
                chart.area(pairs.iter().enumerate().filter(|(_, &(p, t))| f(p, t)).map(|(i, _)| i))
            };
            let tp = sel(&|p, t| p == l && t == l);
            let fp = sel(&|p, t| p == l && t != l);
            let fn_ = sel(&|p, t| p != l && t == l);
            LabelMetrics::from_areas(l, tp, fp, fn_)
        })
        .collect())
}

/// Tab-separated table, one row per label.
pub fn metrics_table(rows: &[LabelMetrics]) -> String {
    let mut s = String::from("label\tFP\tTP\tFN\tPrecision\tRecall\tF1-Measure\n");
    let pct = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{:.2}", 100.0 * v));
    for m in rows {
        writeln!(
            s,
            "{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}",
            m.label,
            m.fp_area,
            m.tp_area,
            m.fn_area,
            pct(m.precision),
            pct(m.recall),
            pct(m.f1)
        )
        .unwrap();
    }
    s
}
