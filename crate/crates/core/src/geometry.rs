//! Rigid-transform algebra and keypoint containers.
//!
//! Rotations are unit quaternions kept in the canonical hemisphere `w >= 0`.
//! The solver's local parameterization is a 6-vector `[ω, τ]`: the rotation
//! update is applied on the left (`exp(ω) · q`) and the translation update is
//! additive, so for a point `p` the perturbed image is
//! `exp(ω)·R·p + t + τ`.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Quaternion, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{KpamError, Result};

/// 3-vector in meters (or unitless for directions).
pub type Vec3 = Vector3<f64>;

/// Perturbation in the local parameterization: rotation first, then translation.
pub type Tangent = Vector6<f64>;

/// Unit-norm tolerance for caller-supplied directions.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Below this separation two points do not define an axis.
pub const DEGENERATE_AXIS_TOLERANCE: f64 = 1e-9;

/// Checks that `v` has unit norm within [`UNIT_TOLERANCE`].
pub fn ensure_unit(v: &Vec3) -> Result<()> {
    let norm = v.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(KpamError::NonUnitDirection { norm });
    }
    Ok(())
}

/// Unit vector pointing from `a` to `b`.
pub fn axis_between(a: &Vec3, b: &Vec3) -> Result<Vec3> {
    let d = b - a;
    let separation = d.norm();
    if !(separation > DEGENERATE_AXIS_TOLERANCE) {
        return Err(KpamError::DegenerateAxis { separation });
    }
    Ok(d / separation)
}

/// Skew-symmetric cross-product matrix, `skew(a) * b == a × b`.
pub fn skew(v: &Vec3) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn canonical(mut q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    q.renormalize();
    if q.w < 0.0 {
        q = UnitQuaternion::new_unchecked(-q.into_inner());
    }
    q
}

/// Element of SE(3).
#[derive(Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vec3,
}

impl fmt::Debug for RigidTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.rotation.quaternion();
        write!(
            f,
            "RigidTransform(q=[{:.6}, {:.6}, {:.6}, {:.6}], t=[{:.6}, {:.6}, {:.6}])",
            q.w, q.i, q.j, q.k, self.translation.x, self.translation.y, self.translation.z
        )
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: UnitQuaternion::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self { rotation: canonical(rotation), translation }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    /// Rotation by `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        Self::from_rotation(UnitQuaternion::from_axis_angle(&axis, angle))
    }

    /// Builds a transform from raw `[w, x, y, z]` quaternion components.
    pub fn from_wxyz(wxyz: [f64; 4], translation: Vec3) -> Result<Self> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(KpamError::Parse(format!("quaternion norm {n} is not usable")));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(KpamError::Parse("translation must be finite".into()));
        }
        Ok(Self::new(UnitQuaternion::from_quaternion(q), translation))
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Quaternion components as `[w, x, y, z]`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Rotates a unit direction; translation is ignored.
    pub fn rotate_direction(&self, v: &Vec3) -> Result<Vec3> {
        ensure_unit(v)?;
        Ok(self.rotation * v)
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self::new(inv, -(inv * self.translation))
    }

    /// `self · other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self::new(self.rotation * other.rotation, self.rotation * other.translation + self.translation)
    }

    /// `g · self · g⁻¹`
    pub fn conjugate_by(&self, g: &RigidTransform) -> Self {
        g.compose(self).compose(&g.inverse())
    }

    /// Applies a local perturbation `[ω, τ]`.
    pub fn retract(&self, delta: &Tangent) -> Self {
        let omega = Vec3::new(delta[0], delta[1], delta[2]);
        let tau = Vec3::new(delta[3], delta[4], delta[5]);
        Self::new(UnitQuaternion::from_scaled_axis(omega) * self.rotation, self.translation + tau)
    }

    /// Geodesic angle between the rotation parts, radians.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    pub fn translation_distance_to(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|c| c.is_finite()) && self.rotation.coords.iter().all(|c| c.is_finite())
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

impl Mul<&Vec3> for &RigidTransform {
    type Output = Vec3;

    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.transform_point(rhs)
    }
}

/// Free-function form of [`RigidTransform::transform_point`].
pub fn transform_point(t: &RigidTransform, p: &Vec3) -> Vec3 {
    t.transform_point(p)
}

/// Free-function form of [`RigidTransform::rotate_direction`].
pub fn rotate_direction(t: &RigidTransform, v: &Vec3) -> Result<Vec3> {
    t.rotate_direction(v)
}

/// `g · t · g⁻¹`
pub fn conjugate(g: &RigidTransform, t: &RigidTransform) -> RigidTransform {
    t.conjugate_by(g)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformRepr {
    rotation_wxyz: [f64; 4],
    translation: [f64; 3],
}

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TransformRepr { rotation_wxyz: self.wxyz(), translation: self.translation.into() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = TransformRepr::deserialize(d)?;
        RigidTransform::from_wxyz(repr.rotation_wxyz, repr.translation.into()).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter writing a [`Vec3`] as a 3-element array.
pub mod vec3_serde {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(a[0], a[1], a[2]))
    }
}

/// Named, ordered 3D keypoints of one object instance.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    names: Vec<String>,
    points: Vec<Vec3>,
}

impl KeypointSet {
    pub fn new(names: Vec<String>, points: Vec<Vec3>) -> Result<Self> {
        if names.is_empty() {
            return Err(KpamError::InvalidKeypoints("at least one keypoint required".into()));
        }
        if names.len() != points.len() {
            return Err(KpamError::InvalidKeypoints(format!("{} names but {} points", names.len(), points.len())));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(KpamError::InvalidKeypoints(format!("duplicate name '{name}'")));
            }
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(KpamError::InvalidKeypoints(format!("keypoint '{}' is not finite", names[i])));
        }
        Ok(Self { names, points })
    }

    /// Convenience constructor from `(name, [x, y, z])` pairs.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, [f64; 3])]) -> Result<Self> {
        Self::new(
            pairs.iter().map(|(n, _)| n.as_ref().to_string()).collect(),
            pairs.iter().map(|(_, p)| Vec3::from(*p)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Vec3> {
        self.index_of(name).map(|i| &self.points[i])
    }

    /// Like [`get`](Self::get) but reports a missing name as an error.
    pub fn require(&self, name: &str) -> Result<&Vec3> {
        self.get(name).ok_or_else(|| KpamError::UnknownKeypoint(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Vec3)> {
        self.names.iter().map(String::as_str).zip(self.points.iter())
    }

    pub fn centroid(&self) -> Vec3 {
        self.points.iter().sum::<Vec3>() / self.points.len() as f64
    }

    /// Applies `f` to every point, keeping names and order.
    pub fn map_points(&self, mut f: impl FnMut(&Vec3) -> Vec3) -> Self {
        Self { names: self.names.clone(), points: self.points.iter().map(&mut f).collect() }
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        self.map_points(|p| t.transform_point(p))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedPoint {
    name: String,
    xyz: [f64; 3],
}

impl Serialize for KeypointSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let list: Vec<NamedPoint> =
            self.iter().map(|(n, p)| NamedPoint { name: n.to_string(), xyz: (*p).into() }).collect();
        list.serialize(s)
    }
}

impl<'de> Deserialize<'de> for KeypointSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let list = Vec::<NamedPoint>::deserialize(d)?;
        KeypointSet::new(
            list.iter().map(|np| np.name.clone()).collect(),
            list.iter().map(|np| Vec3::from(np.xyz)).collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: &Vec3, b: &Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn identity_leaves_points() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(RigidTransform::identity().transform_point(&p), p);
    }

    #[test]
    fn yaw_rotates_x_to_y() {
        let t = RigidTransform::from_axis_angle(&Vec3::z(), FRAC_PI_2);
        assert!(close(&t.transform_point(&Vec3::x()), &Vec3::y(), 1e-12));
    }

    #[test]
    fn roll_flips_z() {
        let t = RigidTransform::from_axis_angle(&Vec3::x(), PI);
        let v = t.rotate_direction(&Vec3::z()).unwrap();
        assert!(close(&v, &-Vec3::z(), 1e-12));
        assert_eq!(RigidTransform::identity().rotate_direction(&Vec3::z()).unwrap(), Vec3::z());
    }

    #[test]
    fn rotate_direction_rejects_non_unit() {
        let err = RigidTransform::identity().rotate_direction(&Vec3::new(0.0, 0.0, 2.0)).unwrap_err();
        assert!(matches!(err, KpamError::NonUnitDirection { .. }));
    }

    #[test]
    fn axis_between_cases() {
        let a = axis_between(&Vec3::zeros(), &Vec3::new(0.0, 0.0, 0.1)).unwrap();
        assert!(close(&a, &Vec3::z(), 1e-15));
        let b = axis_between(&Vec3::new(1.0, 1.0, 1.0), &Vec3::new(2.0, 1.0, 1.0)).unwrap();
        assert!(close(&b, &Vec3::x(), 1e-15));
        let p = Vec3::new(0.3, 0.2, 0.1);
        assert!(matches!(axis_between(&p, &p), Err(KpamError::DegenerateAxis { .. })));
    }

    #[test]
    fn canonical_sign() {
        let q = UnitQuaternion::new_unchecked(Quaternion::new(-0.5, 0.5, 0.5, 0.5));
        let t = RigidTransform::from_rotation(q);
        assert!(t.wxyz()[0] >= 0.0);
    }

    #[test]
    fn conjugation_cases() {
        let g = RigidTransform::new(UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1), Vec3::new(0.1, -0.4, 2.0));
        let t = RigidTransform::new(UnitQuaternion::from_euler_angles(-1.0, 0.4, 0.2), Vec3::new(-0.3, 0.5, 0.7));
        let same = conjugate(&RigidTransform::identity(), &t);
        assert!(same.rotation_angle_to(&t) < 1e-12 && same.translation_distance_to(&t) < 1e-12);
        let self_conj = conjugate(&t, &t);
        assert!(self_conj.rotation_angle_to(&t) < 1e-9 && self_conj.translation_distance_to(&t) < 1e-9);
        let back = conjugate(&g.inverse(), &conjugate(&g, &t));
        assert!(back.rotation_angle_to(&t) < 1e-9 && back.translation_distance_to(&t) < 1e-9);
    }

    #[test]
    fn keypoint_set_validation() {
        assert!(KeypointSet::from_pairs::<&str>(&[]).is_err());
        assert!(KeypointSet::from_pairs(&[("a", [0.0; 3]), ("a", [1.0; 3])]).is_err());
        assert!(KeypointSet::from_pairs(&[("a", [f64::NAN, 0.0, 0.0])]).is_err());
        let kp = KeypointSet::from_pairs(&[("a", [0.0; 3]), ("b", [1.0, 2.0, 3.0])]).unwrap();
        assert_eq!(kp.get("b"), Some(&Vec3::new(1.0, 2.0, 3.0)));
        assert!(matches!(kp.require("c"), Err(KpamError::UnknownKeypoint(_))));
    }

    #[test]
    fn transform_json_shape() {
        let t = RigidTransform::from_translation(Vec3::new(0.1, 0.0, 0.0));
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"rotation_wxyz":[1.0,0.0,0.0,0.0],"translation":[0.1,0.0,0.0]}"#);
        let back: RigidTransform = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
