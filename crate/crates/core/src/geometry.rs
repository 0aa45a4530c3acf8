//! Quaternion and rigid-transform algebra shared by every other module.
//!
//! Conventions, used everywhere including the wire and file formats:
//! quaternion components are ordered `(w, x, y, z)`, rotations compose
//! left-to-right as `a * b` (apply `b` first), and a quaternion and its
//! negation denote the same rotation.

use crate::real::Real;
use thiserror::Error;

/// Unit-norm tolerance applied by constructors and comparisons.
pub const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("axis is not unit length (norm {norm})")]
    InvalidAxis { norm: f64 },
}

/// Plain 3-vector in meters (or whatever the caller's unit is).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<R = f64> {
    pub x: R,
    pub y: R,
    pub z: R,
}

impl<R: Real> Vec3<R> {
    pub fn new(x: R, y: R, z: R) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(R::zero(), R::zero(), R::zero())
    }

    pub fn unit_x() -> Self {
        Self::new(R::one(), R::zero(), R::zero())
    }

    pub fn unit_y() -> Self {
        Self::new(R::zero(), R::one(), R::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(R::zero(), R::zero(), R::one())
    }

    pub fn dot(self, o: Self) -> R {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> R {
        self.dot(self).sqrt()
    }

    pub fn scaled(self, s: R) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    /// Unit vector in the same direction, or `None` for a (near-)zero input.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n <= R::zero() || !n.is_finite() {
            None
        } else {
            Some(self.scaled(R::one() / n))
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<R: Real> core::ops::Add for Vec3<R> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<R: Real> core::ops::Sub for Vec3<R> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<R: Real> core::ops::Neg for Vec3<R> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion, components ordered `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat<R = f64> {
    pub w: R,
    pub x: R,
    pub y: R,
    pub z: R,
}

impl<R: Real> Default for Quat<R> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<R: Real> Quat<R> {
    pub fn new(w: R, x: R, y: R, z: R) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(R::one(), R::zero(), R::zero(), R::zero())
    }

    /// Rotation by `angle` radians about `axis`, which must already be unit
    /// length within [`UNIT_TOL`].
    pub fn from_axis_angle(axis: Vec3<R>, angle: R) -> Result<Self, GeometryError> {
        let n = axis.norm();
        if ((n - R::one()).abs() > R::of(UNIT_TOL)) || !n.is_finite() {
            return Err(GeometryError::InvalidAxis {
                norm: n.to_f64().unwrap_or(f64::NAN),
            });
        }
        let half = angle * R::of(0.5);
        let s = half.sin();
        Ok(Self::new(half.cos(), axis.x * s, axis.y * s, axis.z * s))
    }

    /// Same as [`Quat::from_axis_angle`] but normalizes the axis itself.
    /// Returns identity for a zero axis.
    pub fn about(axis: Vec3<R>, angle: R) -> Self {
        match axis.normalized() {
            Some(a) => Self::from_axis_angle(a, angle).expect("normalized axis"),
            None => Self::identity(),
        }
    }

    pub fn rot_x(angle: R) -> Self {
        Self::from_axis_angle(Vec3::unit_x(), angle).expect("unit axis")
    }

    pub fn rot_y(angle: R) -> Self {
        Self::from_axis_angle(Vec3::unit_y(), angle).expect("unit axis")
    }

    pub fn rot_z(angle: R) -> Self {
        Self::from_axis_angle(Vec3::unit_z(), angle).expect("unit axis")
    }

    pub fn norm(self) -> R {
        self.dot(self).sqrt()
    }

    pub fn dot(self, o: Self) -> R {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Representative with non-negative scalar part; `q` and `-q` map to the
    /// same rotation, this picks one of the pair.
    pub fn canonicalized(self) -> Self {
        if self.w < R::zero() {
            Self::new(-self.w, -self.x, -self.y, -self.z)
        } else {
            self
        }
    }

    /// Rotate a vector.
    pub fn rotate(self, v: Vec3<R>) -> Vec3<R> {
        // q * (0,v) * q^-1, expanded.
        let u = Vec3::new(self.x, self.y, self.z);
        let two = R::of(2.0);
        let t = u.cross(v).scaled(two);
        v + t.scaled(self.w) + u.cross(t)
    }

    /// Geodesic angle between two rotations, `2*acos(|<q1,q2>|)`; insensitive
    /// to the double cover.
    pub fn angle_to(self, o: Self) -> R {
        let d = self.dot(o).abs();
        let d = if d > R::one() { R::one() } else { d };
        R::of(2.0) * d.acos()
    }

    /// True when both quaternions denote the same rotation within `tol`
    /// radians of geodesic distance.  Computed via the chord distance
    /// `min(|q1-q2|, |q1+q2|) = 2 sin(angle/4)`, which stays accurate where
    /// `acos` does not (nearly identical rotations).
    pub fn rotation_eq(self, o: Self, tol: R) -> bool {
        let d2 = (self.w - o.w).powi(2)
            + (self.x - o.x).powi(2)
            + (self.y - o.y).powi(2)
            + (self.z - o.z).powi(2);
        let s2 = (self.w + o.w).powi(2)
            + (self.x + o.x).powi(2)
            + (self.y + o.y).powi(2)
            + (self.z + o.z).powi(2);
        let half_chord = d2.min(s2).sqrt() * R::of(0.5);
        let half_chord = if half_chord > R::one() {
            R::one()
        } else {
            half_chord
        };
        R::of(4.0) * half_chord.asin() <= tol
    }

    /// Axis and angle with angle in `[0, pi]`. The axis is arbitrary (unit x)
    /// for the identity rotation.
    pub fn to_axis_angle(self) -> (Vec3<R>, R) {
        let q = self.canonicalized();
        let s = Vec3::new(q.x, q.y, q.z).norm();
        if s < R::of(1e-12) {
            return (Vec3::unit_x(), R::zero());
        }
        let angle = R::of(2.0) * s.atan2(q.w);
        (Vec3::new(q.x / s, q.y / s, q.z / s), angle)
    }

    /// Rotation scaled by `factor` along its own axis (`q^factor`), used for
    /// angular-velocity extrapolation.
    pub fn powf(self, factor: R) -> Self {
        let (axis, angle) = self.to_axis_angle();
        Self::from_axis_angle(axis, angle * factor).expect("unit axis")
    }

    /// Row-major rotation matrix, handy where individual elements are needed.
    pub fn to_matrix(self) -> [[R; 3]; 3] {
        let Quat { w, x, y, z } = self;
        let two = R::of(2.0);
        let one = R::one();
        [
            [
                one - two * (y * y + z * z),
                two * (x * y - w * z),
                two * (x * z + w * y),
            ],
            [
                two * (x * y + w * z),
                one - two * (x * x + z * z),
                two * (y * z - w * x),
            ],
            [
                two * (x * z - w * y),
                two * (y * z + w * x),
                one - two * (x * x + y * y),
            ],
        ]
    }
}

impl<R: Real> core::ops::Mul for Quat<R> {
    type Output = Self;
    /// Hamilton product; `(a * b).rotate(v) == a.rotate(b.rotate(v))`.
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Position plus orientation; the universal spatial value of the system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<R = f64> {
    pub position: Vec3<R>,
    pub orientation: Quat<R>,
}

impl<R: Real> Default for Pose<R> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<R: Real> Pose<R> {
    pub fn new(position: Vec3<R>, orientation: Quat<R>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Vec3::zero(), Quat::identity())
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.orientation.is_finite()
    }
}

/// Rotation followed by translation; frame calibration carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<R = f64> {
    pub rotation: Quat<R>,
    pub translation: Vec3<R>,
}

impl<R: Real> Default for RigidTransform<R> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<R: Real> RigidTransform<R> {
    pub fn new(rotation: Quat<R>, translation: Vec3<R>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Quat::identity(), Vec3::zero())
    }

    pub fn from_translation(translation: Vec3<R>) -> Self {
        Self::new(Quat::identity(), translation)
    }

    pub fn from_rotation(rotation: Quat<R>) -> Self {
        Self::new(rotation, Vec3::zero())
    }

    /// Rotation applied first, then the translation added.
    pub fn apply(&self, p: Vec3<R>) -> Vec3<R> {
        self.rotation.rotate(p) + self.translation
    }

    /// Transform a full pose: position mapped, orientation rotated.
    pub fn apply_pose(&self, p: &Pose<R>) -> Pose<R> {
        Pose::new(self.apply(p.position), self.rotation * p.orientation)
    }

    /// `self` after `other`: `compose(a, b).apply(p) == a.apply(b.apply(p))`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation.rotate(other.translation) + self.translation,
        )
    }

    pub fn invert(&self) -> Self {
        let inv_rot = self.rotation.conjugate();
        Self::new(inv_rot, -inv_rot.rotate(self.translation))
    }
}
