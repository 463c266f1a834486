use std::path::Path;

use proptest::prelude::*;

use ffmap::config::Config;
use ffmap::eval::{metrics, surface_area, SurfaceChart, AREA_CELL};
use ffmap::geometry::{Label, Point3, Pose};
use ffmap::io::pgm::{read_grid, write_grid};
use ffmap::io::ply::{read_ply, write_ply};
use ffmap::labeling::{FrameId, LabeledCloud};
use ffmap::map::{Cell, GridFrame, OccupancyGrid, Trajectory};
use ffmap::rearrange::{resample_line, PointLine};
use ffmap::walls::{detect_vertical_structures, forward_difference};

fn label() -> impl Strategy<Value = Label> {
    (0..Label::ALL.len()).prop_map(|i| Label::ALL[i])
}

fn point() -> impl Strategy<Value = Point3> {
    (-5.0..5.0f64, -5.0..5.0f64, 0.0..3.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn labeled() -> impl Strategy<Value = Vec<(Point3, Label, Label)>> {
    prop::collection::vec((point(), label(), label()), 1..120)
}

fn clouds(v: &[(Point3, Label, Label)]) -> (LabeledCloud, LabeledCloud) {
    let pts: Vec<Point3> = v.iter().map(|e| e.0).collect();
    let p: Vec<Label> = v.iter().map(|e| e.1).collect();
    let t: Vec<Label> = v.iter().map(|e| e.2).collect();
    (
        LabeledCloud::from_parts(&pts, &p, FrameId::World, 0.0),
        LabeledCloud::from_parts(&pts, &t, FrameId::World, 0.0),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_ignore_point_order(v in labeled(), seed in any::<u64>()) {
        let (p, t) = clouds(&v);
        let mut shuffled = v.clone();
        let n = shuffled.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let (ps, ts) = clouds(&shuffled);
        prop_assert_eq!(metrics(&p, &t, 0.0).unwrap(), metrics(&ps, &ts, 0.0).unwrap());
    }

    #[test]
    fn ratios_in_unit_interval(v in labeled()) {
        let (p, t) = clouds(&v);
        for m in metrics(&p, &t, 0.0).unwrap() {
            for r in [m.precision, m.recall, m.f1].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&r));
            }
            prop_assert!(m.tp_area >= 0.0 && m.fp_area >= 0.0 && m.fn_area >= 0.0);
        }
    }

    #[test]
    fn chart_area_monotone_and_subadditive(pts in prop::collection::vec(point(), 1..200), cut in 0usize..200) {
        let chart = SurfaceChart::new(&pts, AREA_CELL);
        let k = cut.min(pts.len());
        let (a, b, all) = (chart.area(0..k), chart.area(k..pts.len()), chart.area(0..pts.len()));
        prop_assert!(a <= all && b <= all);
        prop_assert!(all <= a + b + 1e-12);
        prop_assert_eq!(all, surface_area(&pts, AREA_CELL));
    }

    #[test]
    fn config_text_round_trip(d in 0.01..5.0f64, mp in 2usize..50, extra in 0usize..300, seed in any::<u64>(), relabel in any::<bool>()) {
        let c = Config { d_threshold: d, min_points: mp, resample_count: mp + extra, seed, map_relabel: relabel, ..Config::default() };
        prop_assert_eq!(Config::parse(&c.to_text(), Path::new("c")).unwrap(), c);
    }

    #[test]
    fn resampling_keeps_order_and_count(pts in prop::collection::vec(point(), 1..300), target in 2usize..400) {
        let line = PointLine { ring: 0, side: 0, beam_angle: 0.0, sources: (0..pts.len()).collect(), points: pts.clone() };
        let r = resample_line(&line, target).unwrap();
        prop_assert_eq!(r.len(), target);
        prop_assert!(r.sources.windows(2).all(|w| w[0] <= w[1]));
        for (p, &s) in r.points.iter().zip(&r.sources) {
            prop_assert_eq!(*p, pts[s]);
        }
    }

    #[test]
    fn vertical_segments_respect_invariants(zs in prop::collection::vec((0.0..3.0f64, 2.0..4.0f64), 2..120), d in 0.05..2.0f64, mp in 2usize..15) {
        let mut zs = zs;
        zs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let pts: Vec<Point3> = zs.iter().map(|&(z, r)| Point3::new(r, 0.0, z)).collect();
        let diffs = forward_difference(&pts).unwrap();
        prop_assert_eq!(diffs.len(), pts.len() - 1);
        prop_assert!(diffs.iter().all(|&x| x >= 0.0));
        let segs = detect_vertical_structures(0, &pts, &diffs, d, mp);
        for s in &segs {
            prop_assert!(s.len() >= mp);
            prop_assert!(s.z_top >= s.z_bottom);
            prop_assert!(diffs[s.start_idx..s.end_idx].iter().all(|&x| x < d));
        }
        prop_assert!(segs.windows(2).all(|w| w[0].end_idx < w[1].start_idx));
    }

    #[test]
    fn trajectory_hits_samples(xs in prop::collection::vec(-10.0..10.0f64, 2..10)) {
        let poses: Vec<Pose> = xs.iter().enumerate().map(|(i, &x)| Pose::planar(x, -x, x / 3.0, i as f64)).collect();
        let t = Trajectory::new(poses.clone()).unwrap();
        for p in &poses {
            let q = t.pose_at(p.timestamp).unwrap();
            prop_assert!(q.translation.distance(&p.translation) < 1e-12);
        }
        let mid = t.pose_at(0.5).unwrap();
        prop_assert!((mid.translation.x - (xs[0] + xs[1]) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn ply_round_trip(v in prop::collection::vec((point(), 0u16..64, label()), 0..100)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        let pts: Vec<Point3> = v.iter().map(|e| e.0).collect();
        let rings: Vec<u16> = v.iter().map(|e| e.1).collect();
        let labels: Vec<Label> = v.iter().map(|e| e.2).collect();
        write_ply(&path, &pts, Some(&rings), Some(&labels)).unwrap();
        let c = read_ply(&path).unwrap();
        prop_assert_eq!(c.points, pts);
        prop_assert_eq!(c.rings, Some(rings));
        prop_assert_eq!(c.labels, Some(labels));
    }

    #[test]
    fn grid_round_trip(w in 1usize..30, h in 1usize..30, cells in prop::collection::vec(0u8..3, 900)) {
        let frame = GridFrame { origin: (-1.25, 0.5), width: w, height: h, resolution: 0.05 };
        let mut g = OccupancyGrid::new(&frame, Cell::Unknown);
        for (k, c) in g.cells.iter_mut().enumerate() {
            *c = [Cell::Occupied, Cell::Free, Cell::Unknown][cells[k] as usize];
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.pgm");
        write_grid(&path, &g).unwrap();
        let back = read_grid(&path).unwrap();
        prop_assert_eq!(back.cells, g.cells);
        prop_assert_eq!((back.width, back.height), (w, h));
    }
}
