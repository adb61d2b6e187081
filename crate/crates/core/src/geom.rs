//! Rigid-body geometry: unit-quaternion rotations, rigid and similarity
//! transforms, timestamped poses and interpolation between them.
//!
//! Angles are radians internally; the public distance helpers that feed the
//! metrics report degrees.

use std::ops::Mul;

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Above this quaternion dot product slerp degenerates to normalized lerp.
const SLERP_LINEAR_THRESHOLD: f64 = 1.0 - 1e-9;

/// A 3D rotation stored as a unit quaternion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(UnitQuaternion::identity())
    }

    /// Builds a rotation from scalar-first quaternion components,
    /// renormalizing them.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        if ![w, x, y, z].iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite quaternion ({w}, {x}, {y}, {z})"
            )));
        }
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if norm < 1e-12 {
            return Err(Error::InvalidInput("zero-norm quaternion".into()));
        }
        Ok(Rotation(UnitQuaternion::new_unchecked(q / norm)))
    }

    pub fn from_axis_angle(axis: Vec3, angle_rad: f64) -> Self {
        match Unit::try_new(axis, 1e-15) {
            Some(axis) => Rotation(UnitQuaternion::from_axis_angle(&axis, angle_rad)),
            None => Rotation::identity(),
        }
    }

    /// Rotation by the rotation vector `v` (axis times angle in radians).
    pub fn from_scaled_axis(v: Vec3) -> Self {
        Rotation(UnitQuaternion::from_scaled_axis(v))
    }

    pub fn about_z(angle_rad: f64) -> Self {
        Rotation::from_axis_angle(Vec3::z(), angle_rad)
    }

    pub fn from_unit_quaternion(q: UnitQuaternion<f64>) -> Self {
        Rotation(q)
    }

    pub fn from_matrix(m: &nalgebra::Matrix3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*m);
        Rotation(UnitQuaternion::from_rotation_matrix(&rot))
    }

    pub fn as_unit_quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    /// Scalar-first components `[w, x, y, z]`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn to_matrix(&self) -> nalgebra::Matrix3<f64> {
        self.0.to_rotation_matrix().into_inner()
    }

    /// The same rotation with the quaternion sign flipped.
    pub fn negated(&self) -> Self {
        Rotation(UnitQuaternion::new_unchecked(-self.0.into_inner()))
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.inverse())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0.transform_vector(v)
    }

    /// Geodesic distance to `other` in radians, in `[0, pi]`.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        let d = self.0.inverse() * other.0;
        let q = d.quaternion();
        2.0 * q.imag().norm().atan2(q.w.abs())
    }

    /// Spherical interpolation along the shorter arc; `s = 0` gives `self`.
    pub fn slerp(&self, other: &Rotation, s: f64) -> Rotation {
        let q0 = self.0.into_inner();
        let mut q1 = other.0.into_inner();
        let mut dot = q0.dot(&q1);
        if dot < 0.0 {
            q1 = -q1;
            dot = -dot;
        }
        let q = if dot > SLERP_LINEAR_THRESHOLD {
            q0 * (1.0 - s) + q1 * s
        } else {
            let theta = dot.min(1.0).acos();
            let sin_theta = theta.sin();
            q0 * (((1.0 - s) * theta).sin() / sin_theta) + q1 * ((s * theta).sin() / sin_theta)
        };
        Rotation(UnitQuaternion::new_normalize(q))
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(UnitQuaternion::new_normalize((self.0 * rhs.0).into_inner()))
    }
}

/// Geodesic distance between two rotations in degrees, in `[0, 180]`.
pub fn rotation_angle(a: &Rotation, b: &Rotation) -> Result<f64> {
    if !a
        .wxyz()
        .iter()
        .chain(b.wxyz().iter())
        .all(|c| c.is_finite())
    {
        return Err(Error::InvalidInput("non-finite rotation".into()));
    }
    Ok(a.angle_to(b).to_degrees().clamp(0.0, 180.0))
}

/// A proper rigid motion: `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RigidTransform {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        RigidTransform::default()
    }

    pub fn from_translation(translation: Vec3) -> Self {
        RigidTransform::new(Rotation::identity(), translation)
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        RigidTransform::new(r, -r.rotate(&self.translation))
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation.rotate(&other.translation) + self.translation,
        )
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

/// A similarity transform: `x -> s R x + t` with `s > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityTransform {
    scale: f64,
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn new(scale: f64, rotation: Rotation, translation: Vec3) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidInput(format!(
                "similarity scale must be positive, got {scale}"
            )));
        }
        Ok(SimilarityTransform {
            scale,
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        SimilarityTransform::from_rigid(&RigidTransform::identity())
    }

    pub fn from_rigid(t: &RigidTransform) -> Self {
        SimilarityTransform {
            scale: 1.0,
            rotation: t.rotation,
            translation: t.translation,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rigid_part(&self) -> RigidTransform {
        RigidTransform::new(self.rotation, self.translation)
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        let s = 1.0 / self.scale;
        SimilarityTransform {
            scale: s,
            rotation: r,
            translation: -(r.rotate(&self.translation) * s),
        }
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &SimilarityTransform) -> Self {
        SimilarityTransform {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.rotation.rotate(&other.translation) * self.scale + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) * self.scale + self.translation
    }

    /// Maps a pose into the target frame. The scale only affects the
    /// translation; the pose orientation is rotated but not scaled.
    pub fn apply(&self, pose: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * pose.rotation,
            self.transform_point(&pose.translation),
        )
    }
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        SimilarityTransform::identity()
    }
}

/// A rigid transform stamped with a time in seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub timestamp: f64,
    pub transform: RigidTransform,
}

impl Pose {
    pub fn new(timestamp: f64, transform: RigidTransform) -> Self {
        Pose {
            timestamp,
            transform,
        }
    }

    pub fn position(&self) -> Vec3 {
        self.transform.translation
    }
}

/// Interpolates between two stamped poses at time `t`: linear in
/// translation, slerp in rotation. The endpoints are returned unchanged
/// when `t` hits them exactly.
pub fn interpolate_pose(p0: &Pose, p1: &Pose, t: f64) -> Result<RigidTransform> {
    let (t0, t1) = (p0.timestamp, p1.timestamp);
    if !(t.is_finite() && t0.is_finite() && t1.is_finite()) {
        return Err(Error::InvalidInput("non-finite timestamp".into()));
    }
    if t0 > t1 {
        return Err(Error::InvalidInput(format!(
            "interpolation interval is reversed: {t0} > {t1}"
        )));
    }
    if t < t0 || t > t1 {
        return Err(Error::OutOfRange {
            t,
            start: t0,
            end: t1,
        });
    }
    if t0 == t1 {
        if p0.transform != p1.transform {
            return Err(Error::DegenerateInterval(t0));
        }
        return Ok(p0.transform);
    }
    if t == t0 {
        return Ok(p0.transform);
    }
    if t == t1 {
        return Ok(p1.transform);
    }
    let s = (t - t0) / (t1 - t0);
    let a = &p0.transform;
    let b = &p1.transform;
    Ok(RigidTransform::new(
        a.rotation.slerp(&b.rotation, s),
        a.translation + (b.translation - a.translation) * s,
    ))
}
