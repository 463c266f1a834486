//! Shared geometric vocabulary: points, labels, rigid poses and planes.
//!
//! All frames are right-handed. The world and robot frames are gravity
//! aligned with +z up.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Quaternion, SymmetricEigen, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// A point (or free vector) in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, o: &Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(&self) -> Point3 {
        *self * (1.0 / self.norm())
    }

    pub fn distance(&self, o: &Point3) -> f64 {
        (*self - *o).norm()
    }

    /// Horizontal range from the vertical axis through the origin.
    pub fn horizontal_range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Point3::new(v.x, v.y, v.z)
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Semantic class of a point. The discriminants are the on-disk byte values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Label {
    Floor = 0,
    Ceiling = 1,
    Wall = 2,
    Door = 3,
    Clutter = 4,
}

impl Label {
    pub const ALL: [Label; 5] = [
        Label::Floor,
        Label::Ceiling,
        Label::Wall,
        Label::Door,
        Label::Clutter,
    ];

    pub fn from_byte(b: u8) -> Option<Label> {
        Label::ALL.get(b as usize).copied()
    }

    pub fn as_byte(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Floor => "Floor",
            Label::Ceiling => "Ceiling",
            Label::Wall => "Wall",
            Label::Door => "Door",
            Label::Clutter => "Clutter",
        }
    }

    /// Horizontal surfaces are measured on the x-y chart.
    pub fn is_horizontal(self) -> bool {
        matches!(self, Label::Floor | Label::Ceiling)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A timestamped rigid transform, mapping points from a body frame into a
/// parent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Point3,
    pub rotation: UnitQuaternion<f64>,
    pub timestamp: f64,
}

impl Pose {
    /// Builds a pose from a quaternion given as (w, x, y, z). The quaternion
    /// must be unit length within 1e-6.
    pub fn new(translation: Point3, wxyz: [f64; 4], timestamp: f64) -> Result<Pose> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let n = q.norm();
        if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidPose(format!("quaternion norm {n}")));
        }
        if !translation.is_finite() || !timestamp.is_finite() {
            return Err(Error::InvalidPose("non-finite translation or timestamp".into()));
        }
        Ok(Pose {
            translation,
            rotation: UnitQuaternion::new_normalize(q),
            timestamp,
        })
    }

    pub fn identity() -> Pose {
        Pose {
            translation: Point3::ORIGIN,
            rotation: UnitQuaternion::identity(),
            timestamp: 0.0,
        }
    }

    pub fn from_rotation(translation: Point3, rotation: UnitQuaternion<f64>, timestamp: f64) -> Pose {
        Pose {
            translation,
            rotation,
            timestamp,
        }
    }

    /// Planar pose: position on the ground, heading about +z.
    pub fn planar(x: f64, y: f64, yaw: f64, timestamp: f64) -> Pose {
        Pose {
            translation: Point3::new(x, y, 0.0),
            rotation: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
            timestamp,
        }
    }

    /// Quaternion as (w, x, y, z).
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from_vector(&(self.rotation * p.to_vector())) + self.translation
    }

    pub fn rotate(&self, v: &Point3) -> Point3 {
        Point3::from_vector(&(self.rotation * v.to_vector()))
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        let t = inv * self.translation.to_vector();
        Pose {
            translation: Point3::from_vector(&-t),
            rotation: inv,
            timestamp: self.timestamp,
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            translation: self.transform_point(&other.translation),
            rotation: self.rotation * other.rotation,
            timestamp: self.timestamp,
        }
    }

    /// Linear translation and spherical-linear rotation between two poses,
    /// `s` in [0, 1].
    pub fn interpolate(a: &Pose, b: &Pose, s: f64) -> Pose {
        let translation = a.translation + (b.translation - a.translation) * s;
        let rotation = a
            .rotation
            .try_slerp(&b.rotation, s, 1e-12)
            .unwrap_or(a.rotation);
        Pose {
            translation,
            rotation,
            timestamp: a.timestamp + (b.timestamp - a.timestamp) * s,
        }
    }
}

/// Plane `{p : normal·p + d = 0}` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneModel {
    pub normal: Point3,
    pub d: f64,
    pub inlier_count: usize,
}

impl PlaneModel {
    /// Normalizes `normal`; `d` is scaled accordingly.
    pub fn new(normal: Point3, d: f64) -> PlaneModel {
        let n = normal.norm();
        PlaneModel {
            normal: normal * (1.0 / n),
            d: d / n,
            inlier_count: 0,
        }
    }

    pub fn through_point(normal: Point3, p: &Point3) -> PlaneModel {
        let n = normal.normalized();
        PlaneModel {
            normal: n,
            d: -n.dot(p),
            inlier_count: 0,
        }
    }

    /// Signed distance, positive on the side the normal points toward.
    pub fn distance(&self, p: &Point3) -> f64 {
        self.normal.dot(p) + self.d
    }

    pub fn flipped(&self) -> PlaneModel {
        PlaneModel {
            normal: -self.normal,
            d: -self.d,
            inlier_count: self.inlier_count,
        }
    }

    /// Orient the normal so that `p` lies on the non-negative side.
    pub fn oriented_toward(&self, p: &Point3) -> PlaneModel {
        if self.distance(p) < 0.0 {
            self.flipped()
        } else {
            *self
        }
    }

    /// Angle between the normal and the +z axis, folded to [0, π/2].
    pub fn tilt_from_vertical(&self) -> f64 {
        self.normal.z.abs().min(1.0).acos()
    }

    /// Total-least-squares fit: the normal is the eigenvector of the smallest
    /// covariance eigenvalue.
    pub fn fit_least_squares(points: &[Point3]) -> Result<PlaneModel> {
        let shape = CovarianceShape::of(points)?;
        if shape.is_collinear() {
            return Err(Error::DegenerateInput("points are collinear"));
        }
        let mut plane = PlaneModel::through_point(shape.axes[0], &shape.centroid);
        plane.inlier_count = points.len();
        Ok(plane)
    }
}

/// Centroid and principal axes of a point set, eigenvalues ascending.
#[derive(Debug, Clone, Copy)]
pub struct CovarianceShape {
    pub centroid: Point3,
    pub eigenvalues: [f64; 3],
    pub axes: [Point3; 3],
}

impl CovarianceShape {
    pub fn of(points: &[Point3]) -> Result<CovarianceShape> {
        if points.len() < 3 {
            return Err(Error::DegenerateInput("fewer than 3 points"));
        }
        let n = points.len() as f64;
        let mut c = Point3::ORIGIN;
        for p in points {
            c = c + *p;
        }
        let c = c * (1.0 / n);
        let mut m = Matrix3::<f64>::zeros();
        for p in points {
            let v = (*p - c).to_vector();
            m += v * v.transpose();
        }
        m /= n;
        let eig = SymmetricEigen::new(m);
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let col = |i: usize| Point3::from_vector(&eig.eigenvectors.column(i).into_owned());
        Ok(CovarianceShape {
            centroid: c,
            eigenvalues: [
                eig.eigenvalues[idx[0]].max(0.0),
                eig.eigenvalues[idx[1]].max(0.0),
                eig.eigenvalues[idx[2]].max(0.0),
            ],
            axes: [col(idx[0]), col(idx[1]), col(idx[2])],
        })
    }

    /// Middle-to-largest eigenvalue ratio below 1e-9.
    pub fn is_collinear(&self) -> bool {
        self.eigenvalues[2] <= 0.0 || self.eigenvalues[1] / self.eigenvalues[2] < 1e-9
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: Point3, b: Point3) {
        assert_abs_diff_eq!(a.x, b.x, epsilon = 1e-12);
        assert_abs_diff_eq!(a.y, b.y, epsilon = 1e-12);
        assert_abs_diff_eq!(a.z, b.z, epsilon = 1e-12);
    }

    #[test]
    fn transform_point_examples() {
        let p = Point3::new(1.0, 2.0, 3.0);
        close(Pose::identity().transform_point(&p), p);

        let t = Pose::new(Point3::new(1.0, 0.0, 0.0), [1.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        close(t.transform_point(&Point3::ORIGIN), Point3::new(1.0, 0.0, 0.0));

        let r = Pose::planar(0.0, 0.0, FRAC_PI_2, 0.0);
        close(r.transform_point(&Point3::new(1.0, 0.0, 0.0)), Point3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn pose_rejects_non_unit_quaternion() {
        assert!(Pose::new(Point3::ORIGIN, [1.0, 0.1, 0.0, 0.0], 0.0).is_err());
        assert!(Pose::new(Point3::ORIGIN, [1.0 + 5e-7, 0.0, 0.0, 0.0], 0.0).is_ok());
    }

    #[test]
    fn point_plane_distance_examples() {
        let z0 = PlaneModel::new(Point3::new(0.0, 0.0, 1.0), 0.0);
        assert_eq!(z0.distance(&Point3::new(0.0, 0.0, 2.0)), 2.0);
        assert_eq!(z0.distance(&Point3::new(3.0, -1.0, 0.0)), 0.0);
        let x1 = PlaneModel::new(Point3::new(1.0, 0.0, 0.0), -1.0);
        assert_eq!(x1.distance(&Point3::ORIGIN), -1.0);
    }

    #[test]
    fn least_squares_recovers_three_point_plane() {
        let pts = [
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, 1.0),
            Point3::new(0.0, 1.0, 1.0),
        ];
        let pl = PlaneModel::fit_least_squares(&pts).unwrap();
        for p in &pts {
            assert_abs_diff_eq!(pl.distance(p), 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(pl.normal.z.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<_> = (0..10).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.5)).collect();
        assert!(matches!(
            PlaneModel::fit_least_squares(&pts),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn label_bytes_are_stable() {
        for (i, l) in Label::ALL.iter().enumerate() {
            assert_eq!(l.as_byte() as usize, i);
            assert_eq!(Label::from_byte(i as u8), Some(*l));
        }
        assert_eq!(Label::from_byte(5), None);
    }

    #[test]
    fn interpolation_midpoint() {
        let a = Pose::planar(0.0, 0.0, 0.0, 0.0);
        let b = Pose::planar(2.0, 0.0, FRAC_PI_2, 1.0);
        let m = Pose::interpolate(&a, &b, 0.5);
        close(m.translation, Point3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(m.rotation.angle(), FRAC_PI_2 / 2.0, epsilon = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pose() -> impl Strategy<Value = Pose> {
            (
                -10.0..10.0f64,
                -10.0..10.0f64,
                -10.0..10.0f64,
                -1.0..1.0f64,
                -1.0..1.0f64,
                -1.0..1.0f64,
                -1.0..1.0f64,
            )
                .prop_filter("non-zero quaternion", |t| {
                    t.3 * t.3 + t.4 * t.4 + t.5 * t.5 + t.6 * t.6 > 1e-3
                })
                .prop_map(|(x, y, z, w, i, j, k)| {
                    let q = UnitQuaternion::new_normalize(Quaternion::new(w, i, j, k));
                    Pose::from_rotation(Point3::new(x, y, z), q, 0.0)
                })
        }

        fn point() -> impl Strategy<Value = Point3> {
            (-20.0..20.0f64, -20.0..20.0f64, -20.0..20.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
        }

        proptest! {
            #[test]
            fn rigid_transform_preserves_distances(t in pose(), a in point(), b in point()) {
                let d0 = a.distance(&b);
                let d1 = t.transform_point(&a).distance(&t.transform_point(&b));
                prop_assert!((d0 - d1).abs() <= 1e-9);
            }

            #[test]
            fn inverse_round_trips(t in pose(), p in point()) {
                let q = t.inverse().transform_point(&t.transform_point(&p));
                prop_assert!(q.distance(&p) <= 1e-9);
            }

            #[test]
            fn plane_distance_linear_along_normal(p in point(), s in -5.0..5.0f64) {
                let pl = PlaneModel::new(Point3::new(0.3, -0.4, 0.5), 0.7);
                let moved = p + pl.normal * s;
                prop_assert!((pl.distance(&moved) - pl.distance(&p) - s).abs() < 1e-9);
            }
        }
    }
}
