//! Synthetic category instances with shape variation, placement and
//! keypoint observation noise.
//!
//! Sampling order: uniform scale times per-axis stretch in the canonical
//! frame, then a rigid placement, then isotropic Gaussian noise in the world
//! frame. Everything is a pure function of the seed.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{KpamError, Result};
use crate::geometry::{KeypointSet, RigidTransform, Vec3};
use crate::solver::random_rotation;
use crate::taskspec::from_json;

pub const SCENE_VERSION: u32 = 1;

/// Default observation noise, meters.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.002;

/// Handles with a scaled minimum dimension below this are "small".
pub const SMALL_HANDLE_THRESHOLD: f64 = 0.02;

/// Tabletop region where instances are placed (x, y ranges in meters).
const TABLE_X: [f64; 2] = [0.3, 0.7];
const TABLE_Y: [f64; 2] = [-0.3, 0.3];
/// Height of the axis of a mug lying on its side.
const SIDE_LYING_HEIGHT: f64 = 0.04;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryModel {
    pub category: String,
    pub canonical_keypoints: KeypointSet,
    pub scale_range: [f64; 2],
    pub stretch_range: [[f64; 2]; 3],
    pub handle_min_dimension: Option<f64>,
}

impl CategoryModel {
    /// Canonical mug: bottom at the origin, axis along +z, handle toward +x.
    pub fn mug() -> Self {
        Self {
            category: "mug".into(),
            canonical_keypoints: KeypointSet::from_pairs(&[
                ("bottom_center", [0.0, 0.0, 0.0]),
                ("top_center", [0.0, 0.0, 0.1]),
                ("handle_center", [0.06, 0.0, 0.05]),
            ])
            .expect("valid canonical mug"),
            scale_range: [0.5, 2.0],
            stretch_range: [[1.0, 1.0]; 3],
            handle_min_dimension: Some(0.025),
        }
    }

    /// Canonical shoe: heel bottom (p4) at the origin, toe along +x, sole on
    /// z = 0. p1 toe, p2/p3 sole, p5 heel top, p6 ankle opening.
    pub fn shoe() -> Self {
        Self {
            category: "shoe".into(),
            canonical_keypoints: KeypointSet::from_pairs(&[
                ("p1", [0.26, 0.0, 0.01]),
                ("p2", [0.18, 0.0, 0.0]),
                ("p3", [0.09, 0.0, 0.0]),
                ("p4", [0.0, 0.0, 0.0]),
                ("p5", [-0.01, 0.0, 0.09]),
                ("p6", [0.12, 0.0, 0.08]),
            ])
            .expect("valid canonical shoe"),
            scale_range: [0.8, 1.25],
            stretch_range: [[0.9, 1.1]; 3],
            handle_min_dimension: None,
        }
    }

    pub fn builtin(category: &str) -> Result<Self> {
        match category {
            "mug" => Ok(Self::mug()),
            "shoe" => Ok(Self::shoe()),
            other => Err(KpamError::NotApplicable(format!("no built-in category '{other}'"))),
        }
    }

    pub fn with_scale_range(mut self, lo: f64, hi: f64) -> Self {
        self.scale_range = [lo, hi];
        self
    }

    pub fn with_stretch_range(mut self, lo: f64, hi: f64) -> Self {
        self.stretch_range = [[lo, hi]; 3];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = std::iter::once(self.scale_range).chain(self.stretch_range);
        for [lo, hi] in ranges {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(KpamError::validation(
                    "category_model",
                    format!("range [{lo}, {hi}] must satisfy 0 < lo <= hi"),
                ));
            }
        }
        Ok(())
    }
}

/// How instances are placed on the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseDistribution {
    /// No placement: keypoints stay in the canonical frame.
    Identity,
    /// Standing, random yaw and table position.
    Upright,
    /// Lying on its side, random roll about its own axis and random yaw.
    SideLying,
    /// Upright or side-lying with equal probability.
    Mixed,
    /// Uniform rotation, random position above the table.
    Uniform,
}

impl std::str::FromStr for PoseDistribution {
    type Err = KpamError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identity" => Self::Identity,
            "upright" => Self::Upright,
            "side_lying" | "side" => Self::SideLying,
            "mixed" => Self::Mixed,
            "uniform" => Self::Uniform,
            other => return Err(KpamError::Parse(format!("unknown pose distribution '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneInstance {
    pub instance_id: String,
    pub true_keypoints: KeypointSet,
    pub observed_keypoints: KeypointSet,
    pub ground_truth_pose: RigidTransform,
    pub applied_scale: f64,
    pub applied_stretch: [f64; 3],
    pub noise_sigma: f64,
}

fn uniform_in<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn sample_pose<R: Rng>(rng: &mut R, dist: PoseDistribution) -> RigidTransform {
    let on_table = |rng: &mut R, z: f64| Vec3::new(uniform_in(rng, TABLE_X), uniform_in(rng, TABLE_Y), z);
    match dist {
        PoseDistribution::Identity => RigidTransform::identity(),
        PoseDistribution::Upright => {
            let yaw = rng.random_range(0.0..TAU);
            let t = on_table(rng, 0.0);
            RigidTransform::new(UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw), t)
        }
        PoseDistribution::SideLying => {
            let roll = rng.random_range(0.0..TAU);
            let yaw = rng.random_range(0.0..TAU);
            let t = on_table(rng, SIDE_LYING_HEIGHT);
            let r = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw)
                * UnitQuaternion::from_axis_angle(&Vec3::x_axis(), FRAC_PI_2)
                * UnitQuaternion::from_axis_angle(&Vec3::z_axis(), roll);
            RigidTransform::new(r, t)
        }
        PoseDistribution::Mixed => {
            if rng.random_bool(0.5) {
                sample_pose(rng, PoseDistribution::Upright)
            } else {
                sample_pose(rng, PoseDistribution::SideLying)
            }
        }
        PoseDistribution::Uniform => {
            let r = random_rotation(rng);
            let z = rng.random_range(0.0..0.2);
            let t = on_table(rng, z);
            RigidTransform::new(r, t)
        }
    }
}

/// Draws one instance. Deterministic for a given seed.
pub fn sample_instance(
    model: &CategoryModel,
    pose_distribution: PoseDistribution,
    noise_sigma: f64,
    seed: u64,
) -> Result<SceneInstance> {
    model.validate()?;
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(KpamError::validation("noise_sigma", "must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = uniform_in(&mut rng, model.scale_range);
    let stretch = [
        uniform_in(&mut rng, model.stretch_range[0]),
        uniform_in(&mut rng, model.stretch_range[1]),
        uniform_in(&mut rng, model.stretch_range[2]),
    ];
    let pose = sample_pose(&mut rng, pose_distribution);
    let shape = Vec3::from(stretch) * scale;
    let true_keypoints = model.canonical_keypoints.map_points(|p| pose.transform_point(&p.component_mul(&shape)));
    let observed_keypoints = if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("sigma validated");
        true_keypoints.map_points(|p| p + Vec3::from_fn(|_, _| normal.sample(&mut rng)))
    } else {
        true_keypoints.clone()
    };
    Ok(SceneInstance {
        instance_id: format!("{}-s{seed}", model.category),
        true_keypoints,
        observed_keypoints,
        ground_truth_pose: pose,
        applied_scale: scale,
        applied_stretch: stretch,
        noise_sigma,
    })
}

/// `count` instances with ids `<category>-00000`, `<category>-00001`, ...
/// Per-instance seeds are drawn from a stream seeded by `seed`.
pub fn generate_scenes(
    model: &CategoryModel,
    pose_distribution: PoseDistribution,
    noise_sigma: f64,
    seed: u64,
    count: usize,
) -> Result<Vec<SceneInstance>> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut inst = sample_instance(model, pose_distribution, noise_sigma, seeds.random())?;
            inst.instance_id = format!("{}-{i:05}", model.category);
            Ok(inst)
        })
        .collect()
}

/// True when the scaled handle's smaller dimension is under 2 cm.
///
/// The canonical handle dimension is scaled by the instance scale and by the
/// smaller of the x/z stretches (the handle spans the x-z plane).
pub fn classify_small_handle(instance: &SceneInstance, model: &CategoryModel) -> Result<bool> {
    let canonical = model
        .handle_min_dimension
        .ok_or_else(|| KpamError::NotApplicable(format!("category '{}' has no handle", model.category)))?;
    let stretch = instance.applied_stretch[0].min(instance.applied_stretch[2]);
    Ok(canonical * instance.applied_scale * stretch < SMALL_HANDLE_THRESHOLD)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDocument {
    kpam_scene_version: u32,
    instances: Vec<SceneInstance>,
}

pub fn parse_scenes(text: &[u8]) -> Result<Vec<SceneInstance>> {
    let doc: SceneDocument = from_json(text)?;
    if doc.kpam_scene_version != SCENE_VERSION {
        return Err(KpamError::validation(
            "kpam_scene_version",
            format!("unsupported version {}", doc.kpam_scene_version),
        ));
    }
    for (i, inst) in doc.instances.iter().enumerate() {
        if inst.true_keypoints.names() != inst.observed_keypoints.names() {
            return Err(KpamError::validation(format!("instances[{i}]"), "true and observed keypoint names differ"));
        }
        if !(inst.noise_sigma >= 0.0) {
            return Err(KpamError::validation(format!("instances[{i}].noise_sigma"), "must be non-negative"));
        }
    }
    Ok(doc.instances)
}

pub fn serialize_scenes(instances: &[SceneInstance]) -> Vec<u8> {
    let doc = SceneDocument { kpam_scene_version: SCENE_VERSION, instances: instances.to_vec() };
    let mut out = serde_json::to_vec_pretty(&doc).expect("scenes serialize");
    out.push(b'\n');
    out
}
