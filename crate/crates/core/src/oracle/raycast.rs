//! Scene geometry as a flat list of labeled rectangles, and the nearest-hit
//! ray query over it.

use crate::geometry::{Label, Point3};
use crate::labeling::DoorKind;

use super::SceneSpec;

/// Which scene element a return hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceId {
    Floor,
    Ceiling,
    Wall(usize),
    Door(usize),
    Furniture(usize),
}

impl SurfaceId {
    pub fn label(self) -> Label {
        match self {
            SurfaceId::Floor => Label::Floor,
            SurfaceId::Ceiling => Label::Ceiling,
            SurfaceId::Wall(_) => Label::Wall,
            SurfaceId::Door(_) => Label::Door,
            SurfaceId::Furniture(_) => Label::Clutter,
        }
    }
}

/// `origin + a·u + b·v`, `a ∈ [0, u_len]`, `b ∈ [0, v_len]`.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub origin: Point3,
    pub u: Point3,
    pub v: Point3,
    pub u_len: f64,
    pub v_len: f64,
    pub normal: Point3,
    pub surface: SurfaceId,
}

impl Rect {
    pub fn new(origin: Point3, u: Point3, u_len: f64, v: Point3, v_len: f64, surface: SurfaceId) -> Rect {
        let u = u.normalized();
        let v = v.normalized();
        Rect {
            origin,
            u,
            v,
            u_len,
            v_len,
            normal: u.cross(&v).normalized(),
            surface,
        }
    }

    /// Ray parameter of the hit, if the ray meets the rectangle in front of `o`.
    pub fn intersect(&self, o: &Point3, dir: &Point3) -> Option<f64> {
        let denom = self.normal.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = self.normal.dot(&(self.origin - *o)) / denom;
        if t <= 1e-9 {
            return None;
        }
        let rel = *o + *dir * t - self.origin;
        let a = self.u.dot(&rel);
        let b = self.v.dot(&rel);
        if a < 0.0 || a > self.u_len || b < 0.0 || b > self.v_len {
            return None;
        }
        Some(t)
    }

    /// Signed distance of `p` from the rectangle's plane.
    pub fn plane_residual(&self, p: &Point3) -> f64 {
        self.normal.dot(&(*p - self.origin))
    }
}

const EZ: Point3 = Point3::new(0.0, 0.0, 1.0);

/// Flattens the scene into rectangles.
pub fn build_geometry(scene: &SceneSpec) -> Vec<Rect> {
    let mut rects = Vec::new();
    let (lo, hi) = scene.footprint();
    let pad = 1.0;
    let (x0, y0) = (lo.0 - pad, lo.1 - pad);
    let (w, h) = (hi.0 - lo.0 + 2.0 * pad, hi.1 - lo.1 + 2.0 * pad);
    let ex = Point3::new(1.0, 0.0, 0.0);
    let ey = Point3::new(0.0, 1.0, 0.0);
    rects.push(Rect::new(Point3::new(x0, y0, 0.0), ex, w, ey, h, SurfaceId::Floor));
    rects.push(Rect::new(
        Point3::new(x0, y0, scene.ceiling_height),
        ex,
        w,
        ey,
        h,
        SurfaceId::Ceiling,
    ));

    for (wi, seg) in scene.walls.iter().enumerate() {
        let start = Point3::new(seg.start.0, seg.start.1, 0.0);
        let end = Point3::new(seg.end.0, seg.end.1, 0.0);
        let len = start.distance(&end);
        if len <= 0.0 {
            continue;
        }
        let along = (end - start).normalized();
        let left = Point3::new(-along.y, along.x, 0.0);
        let half = seg.thickness / 2.0;
        let id = SurfaceId::Wall(wi);

        let mut doors: Vec<(usize, &super::DoorSpec)> =
            scene.doors.iter().enumerate().filter(|(_, d)| d.wall == wi).collect();
        doors.sort_by(|a, b| a.1.offset.total_cmp(&b.1.offset));

        // face pieces: full-height spans between openings, lintel pieces above
        let mut pieces: Vec<(f64, f64, f64, f64)> = Vec::new(); // (s0, s1, z0, z1)
        let mut cursor = 0.0;
        for (_, d) in &doors {
            if d.offset > cursor {
                pieces.push((cursor, d.offset, 0.0, seg.height));
            }
            if d.lintel < seg.height {
                pieces.push((d.offset, d.offset + d.width, d.lintel, seg.height));
            }
            cursor = d.offset + d.width;
        }
        if cursor < len {
            pieces.push((cursor, len, 0.0, seg.height));
        }
        for side in [1.0, -1.0] {
            let face = start + left * (half * side);
            for &(s0, s1, z0, z1) in &pieces {
                rects.push(Rect::new(
                    face + along * s0 + EZ * z0,
                    along,
                    s1 - s0,
                    EZ,
                    z1 - z0,
                    id,
                ));
            }
        }
        if seg.thickness > 0.0 {
            let back = start - left * half;
            for s in [0.0, len] {
                rects.push(Rect::new(back + along * s, left, seg.thickness, EZ, seg.height, id));
            }
            for (_, d) in &doors {
                for s in [d.offset, d.offset + d.width] {
                    rects.push(Rect::new(back + along * s, left, seg.thickness, EZ, d.lintel, id));
                }
                rects.push(Rect::new(
                    back + along * d.offset + EZ * d.lintel,
                    along,
                    d.width,
                    left,
                    seg.thickness,
                    id,
                ));
            }
        }
        for (di, d) in &doors {
            if d.kind == DoorKind::Closed {
                let panel = start + left * (half - d.recess) + along * d.offset;
                rects.push(Rect::new(panel, along, d.width, EZ, d.lintel, SurfaceId::Door(*di)));
            }
        }
    }

    for (bi, b) in scene.furniture.iter().enumerate() {
        let id = SurfaceId::Furniture(bi);
        let (mn, sz) = (b.min, b.size);
        let mx = mn + sz;
        let ez = EZ;
        rects.push(Rect::new(Point3::new(mn.x, mn.y, mx.z), ex, sz.x, ey, sz.y, id));
        rects.push(Rect::new(Point3::new(mn.x, mn.y, mn.z), ex, sz.x, ez, sz.z, id));
        rects.push(Rect::new(Point3::new(mn.x, mx.y, mn.z), ex, sz.x, ez, sz.z, id));
        rects.push(Rect::new(Point3::new(mn.x, mn.y, mn.z), ey, sz.y, ez, sz.z, id));
        rects.push(Rect::new(Point3::new(mx.x, mn.y, mn.z), ey, sz.y, ez, sz.z, id));
    }
    rects
}

/// Nearest hit along the ray, within `max_range`.
pub fn cast(rects: &[Rect], o: &Point3, dir: &Point3, max_range: f64) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, r) in rects.iter().enumerate() {
        if let Some(t) = r.intersect(o, dir) {
            if t <= max_range && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perpendicular_hit_range() {
        let r = Rect::new(
            Point3::new(2.0, -1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            2.0,
            EZ,
            3.0,
            SurfaceId::Wall(0),
        );
        let t = r.intersect(&Point3::new(0.0, 0.0, 1.0), &Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert!(r.intersect(&Point3::new(0.0, 0.0, 1.0), &Point3::new(-1.0, 0.0, 0.0)).is_none());
        assert!(r.intersect(&Point3::new(0.0, 5.0, 1.0), &Point3::new(1.0, 0.0, 0.0)).is_none());
    }
}
