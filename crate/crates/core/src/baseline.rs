//! Pose-based baseline: fit a similarity transform from a fixed template to
//! the observed keypoints, then move the object so the template lands on a
//! category-level target pose.

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::alignment::{paired_points, umeyama};
use crate::error::{KpamError, Result};
use crate::geometry::{KeypointSet, RigidTransform, Vec3};
use crate::taskspec::from_json;

pub const TEMPLATE_VERSION: u32 = 1;

/// A category template in its own canonical frame, plus the pose that frame
/// should end up at.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub category: String,
    pub keypoints: KeypointSet,
    pub target_pose: RigidTransform,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateDocument {
    kpam_template_version: u32,
    category: String,
    keypoints: KeypointSet,
    target_pose: RigidTransform,
}

impl Template {
    pub fn new(category: impl Into<String>, keypoints: KeypointSet, target_pose: RigidTransform) -> Result<Self> {
        let (src, _) = paired_points(&keypoints, &keypoints)?;
        // reuse the alignment degeneracy check
        umeyama(&src, &src, true)?;
        Ok(Self { category: category.into(), keypoints, target_pose })
    }
}

pub fn parse_template(text: &[u8]) -> Result<Template> {
    let doc: TemplateDocument = from_json(text)?;
    if doc.kpam_template_version != TEMPLATE_VERSION {
        return Err(KpamError::validation(
            "kpam_template_version",
            format!("unsupported version {}", doc.kpam_template_version),
        ));
    }
    Template::new(doc.category, doc.keypoints, doc.target_pose)
        .map_err(|e| KpamError::validation("keypoints", e.to_string()))
}

pub fn serialize_template(t: &Template) -> Vec<u8> {
    let doc = TemplateDocument {
        kpam_template_version: TEMPLATE_VERSION,
        category: t.category.clone(),
        keypoints: t.keypoints.clone(),
        target_pose: t.target_pose,
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("template serializes");
    out.push(b'\n');
    out
}

/// `p ↦ scale · R·p + t`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
    pub scale: f64,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self { rotation: UnitQuaternion::identity(), translation: Vec3::zeros(), scale: 1.0 }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.scale * (self.rotation * p) + self.translation
    }

    /// The pose part with the scale dropped.
    pub fn rigid_part(&self) -> RigidTransform {
        RigidTransform::new(self.rotation, self.translation)
    }
}

#[derive(Serialize, Deserialize)]
struct SimilarityRepr {
    rotation_wxyz: [f64; 4],
    translation: [f64; 3],
    scale: f64,
}

impl Serialize for SimilarityTransform {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rigid = self.rigid_part();
        SimilarityRepr { rotation_wxyz: rigid.wxyz(), translation: self.translation.into(), scale: self.scale }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SimilarityTransform {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SimilarityRepr::deserialize(d)?;
        if !(r.scale > 0.0 && r.scale.is_finite()) {
            return Err(serde::de::Error::custom("scale must be positive"));
        }
        let rigid =
            RigidTransform::from_wxyz(r.rotation_wxyz, r.translation.into()).map_err(serde::de::Error::custom)?;
        Ok(Self { rotation: *rigid.rotation(), translation: *rigid.translation(), scale: r.scale })
    }
}

/// Least-squares similarity alignment of template keypoints onto observed
/// keypoints. Both sets must carry the same names (order may differ).
pub fn fit_similarity(template_kp: &KeypointSet, observed_kp: &KeypointSet) -> Result<SimilarityTransform> {
    if template_kp.len() != observed_kp.len() {
        return Err(KpamError::NameMismatch(format!(
            "template has {} keypoints, observation has {}",
            template_kp.len(),
            observed_kp.len()
        )));
    }
    let (src, dst) = paired_points(template_kp, observed_kp)?;
    let a = umeyama(&src, &dst, true)?;
    if !(a.scale > 0.0 && a.scale.is_finite()) {
        return Err(KpamError::DegenerateGeometry(format!("fitted scale {} is not positive", a.scale)));
    }
    Ok(SimilarityTransform { rotation: a.rotation, translation: a.translation, scale: a.scale })
}

/// Rigid action taking the object from its estimated pose to the template's
/// target pose: `target_pose · rigid(fitted)⁻¹`.
pub fn pose_based_action(template: &Template, fitted: &SimilarityTransform) -> RigidTransform {
    template.target_pose.compose(&fitted.rigid_part().inverse())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mug_template() -> KeypointSet {
        KeypointSet::from_pairs(&[
            ("bottom_center", [0.0, 0.0, -0.1]),
            ("top_center", [0.0, 0.0, 0.0]),
            ("handle_center", [0.06, 0.0, -0.05]),
        ])
        .unwrap()
    }

    #[test]
    fn identity_fit() {
        let s = fit_similarity(&mug_template(), &mug_template()).unwrap();
        assert!((s.scale - 1.0).abs() < 1e-12);
        assert!(s.translation.norm() < 1e-12);
        assert!(s.rotation.angle() < 1e-9);
    }

    #[test]
    fn recovers_uniform_scale() {
        let scaled = mug_template().map_points(|p| 0.6 * p);
        let s = fit_similarity(&mug_template(), &scaled).unwrap();
        assert!((s.scale - 0.6).abs() < 1e-9);
    }

    #[test]
    fn name_mismatch() {
        let other = KeypointSet::from_pairs(&[
            ("bottom_center", [0.0, 0.0, -0.1]),
            ("top_center", [0.0, 0.0, 0.0]),
            ("rim", [0.06, 0.0, -0.05]),
        ])
        .unwrap();
        assert!(matches!(fit_similarity(&mug_template(), &other), Err(KpamError::NameMismatch(_))));
    }

    #[test]
    fn action_cases() {
        let g = RigidTransform::new(UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3), Vec3::new(1.0, 0.0, 2.0));
        let t = Template::new("mug", mug_template(), RigidTransform::identity()).unwrap();
        let a = pose_based_action(&t, &SimilarityTransform::identity());
        assert_eq!(a, RigidTransform::identity());
        let t = Template { target_pose: g, ..t };
        let a = pose_based_action(&t, &SimilarityTransform::identity());
        assert!(a.rotation_angle_to(&g) < 1e-12 && a.translation_distance_to(&g) < 1e-12);
    }

    #[test]
    fn template_rejects_collinear() {
        let line = KeypointSet::from_pairs(&[("a", [0.0; 3]), ("b", [0.0, 0.0, 1.0]), ("c", [0.0, 0.0, 2.0])]).unwrap();
        assert!(Template::new("x", line, RigidTransform::identity()).is_err());
    }
}
