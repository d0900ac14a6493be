//! Constructed scenes where a category-level target pose fails.
//!
//! Both scenarios scale the canonical mug about its `top_center` and pair it
//! with the rim-centered shipped templates:
//!
//! * rack miss: a mug scaled to [`RACK_MISS_SCALE`] keeps the template's
//!   pose, so its handle lands `(1 − s)·‖handle − rim‖` away from the peg
//!   (about 3.1 cm for the shipped geometry);
//! * penetration: a mug scaled to [`PENETRATION_SCALE`] keeps the template's
//!   pose, so its bottom ends `(s − 1)·height` below the table (5 cm).

use nalgebra::UnitQuaternion;

use crate::geometry::{RigidTransform, Vec3};
use crate::scenes::{CategoryModel, SceneInstance};

pub const RACK_MISS_SCALE: f64 = 0.6;
pub const PENETRATION_SCALE: f64 = 1.5;

/// A side-lying placement on the table, used for both scenarios.
pub fn scenario_pose() -> RigidTransform {
    RigidTransform::new(
        UnitQuaternion::from_axis_angle(&Vec3::z_axis(), 0.7) * UnitQuaternion::from_axis_angle(&Vec3::x_axis(), 1.3),
        Vec3::new(0.45, -0.12, 0.04),
    )
}

/// Noise-free canonical mug scaled by `scale` about its top center and placed
/// by `pose`.
pub fn scaled_mug(scale: f64, pose: &RigidTransform, instance_id: &str) -> SceneInstance {
    let model = CategoryModel::mug();
    let top = *model.canonical_keypoints.get("top_center").expect("canonical mug has a top");
    let keypoints = model.canonical_keypoints.map_points(|p| pose.transform_point(&(top + (p - top) * scale)));
    SceneInstance {
        instance_id: instance_id.to_string(),
        true_keypoints: keypoints.clone(),
        observed_keypoints: keypoints,
        ground_truth_pose: *pose,
        applied_scale: scale,
        applied_stretch: [1.0; 3],
        noise_sigma: 0.0,
    }
}

pub fn rack_miss_mug() -> SceneInstance {
    scaled_mug(RACK_MISS_SCALE, &scenario_pose(), "mug-rack-miss")
}

pub fn penetration_mug() -> SceneInstance {
    scaled_mug(PENETRATION_SCALE, &scenario_pose(), "mug-penetration")
}
