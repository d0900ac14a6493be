//! Task specification files: JSON parsing, validation, canonical
//! serialization and binding to observed keypoints.
//!
//! Schema (version 1, lengths in meters, vectors as `[x, y, z]`):
//!
//! ```json
//! {
//!   "kpam_spec_version": 1,
//!   "name": "mug_upright",
//!   "category": "mug",
//!   "required_keypoints": ["bottom_center", "top_center"],
//!   "costs": [{"kind": "axis_alignment", "from_keypoint": "bottom_center",
//!              "to_keypoint": "top_center", "target_axis": [0, 0, 1], "weight": 1.0}],
//!   "constraints": [{"kind": "point_target", "keypoint": "bottom_center",
//!                    "target": [0.6, 0.0, 0.25], "tolerance": 1e-6}],
//!   "approach": null
//! }
//! ```
//!
//! Cost kinds: `point_l2`, `point_to_plane`, `axis_alignment`.
//! Constraint kinds: `point_target`, `half_space`, `workspace_box`.

use serde::{Deserialize, Serialize};

use crate::error::{KpamError, Result};
use crate::geometry::{vec3_serde, KeypointSet, Vec3, UNIT_TOLERANCE};
use crate::solver::Problem;
use crate::terms::{ConstraintTerm, CostTerm};

pub const SPEC_VERSION: u32 = 1;

/// Pre-placement offset along a unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Approach {
    #[serde(with = "vec3_serde")]
    pub direction: Vec3,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    pub category: String,
    pub required_keypoints: Vec<String>,
    pub costs: Vec<CostTerm>,
    pub constraints: Vec<ConstraintTerm>,
    pub approach: Option<Approach>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    kpam_spec_version: u32,
    name: String,
    category: String,
    required_keypoints: Vec<String>,
    #[serde(default)]
    costs: Vec<CostTerm>,
    #[serde(default)]
    constraints: Vec<ConstraintTerm>,
    #[serde(default)]
    approach: Option<Approach>,
}

/// Reads JSON from `text`, reporting the failing field path on error.
pub(crate) fn from_json<'de, T: Deserialize<'de>>(text: &'de [u8]) -> Result<T> {
    let text = std::str::from_utf8(text).map_err(|e| KpamError::Parse(format!("invalid UTF-8: {e}")))?;
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            KpamError::Parse(e.into_inner().to_string())
        } else {
            KpamError::Parse(format!("{path}: {}", e.into_inner()))
        }
    })?;
    de.end().map_err(|e| KpamError::Parse(e.to_string()))?;
    Ok(value)
}

/// Normalizes `v` in place if it is unit within tolerance. Vectors already
/// unit to rounding are left untouched, so parsing is idempotent.
fn normalize_unit(path: &str, v: &mut Vec3) -> Result<()> {
    let n = v.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(KpamError::validation(path, format!("must be a unit vector (norm {n})")));
    }
    if (n - 1.0).abs() > 8.0 * f64::EPSILON {
        *v /= n;
    }
    Ok(())
}

fn require_declared(path: &str, name: &str, declared: &[String]) -> Result<()> {
    if declared.iter().any(|d| d == name) {
        Ok(())
    } else {
        Err(KpamError::validation(path, format!("keypoint '{name}' is not in required_keypoints")))
    }
}

fn require_finite(path: &str, v: &Vec3) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(KpamError::validation(path, "must be finite"))
    }
}

fn validate(doc: SpecDocument) -> Result<TaskSpec> {
    if doc.kpam_spec_version != SPEC_VERSION {
        return Err(KpamError::validation(
            "kpam_spec_version",
            format!("unsupported version {} (expected {SPEC_VERSION})", doc.kpam_spec_version),
        ));
    }
    if doc.name.trim().is_empty() {
        return Err(KpamError::validation("name", "must not be empty"));
    }
    if doc.category.trim().is_empty() {
        return Err(KpamError::validation("category", "must not be empty"));
    }
    if doc.required_keypoints.is_empty() {
        return Err(KpamError::validation("required_keypoints", "must not be empty"));
    }
    for (i, name) in doc.required_keypoints.iter().enumerate() {
        if name.is_empty() {
            return Err(KpamError::validation(format!("required_keypoints[{i}]"), "must not be empty"));
        }
        if doc.required_keypoints[..i].contains(name) {
            return Err(KpamError::validation(format!("required_keypoints[{i}]"), format!("duplicate '{name}'")));
        }
    }
    if doc.costs.is_empty() && doc.constraints.is_empty() {
        return Err(KpamError::validation("costs", "at least one cost or constraint is required"));
    }
    let declared = &doc.required_keypoints;

    let mut costs = doc.costs;
    for (i, term) in costs.iter_mut().enumerate() {
        let at = |field: &str| format!("costs[{i}].{field}");
        let w = term.weight();
        if !(w >= 0.0 && w.is_finite()) {
            return Err(KpamError::validation(at("weight"), "must be finite and non-negative"));
        }
        match term {
            CostTerm::PointL2 { keypoint, target, .. } => {
                require_declared(&at("keypoint"), keypoint, declared)?;
                require_finite(&at("target"), target)?;
            }
            CostTerm::PointToPlane { keypoint, plane, .. } => {
                require_declared(&at("keypoint"), keypoint, declared)?;
                normalize_unit(&at("plane.normal"), &mut plane.normal)?;
            }
            CostTerm::AxisAlignment { from_keypoint, to_keypoint, target_axis, .. } => {
                require_declared(&at("from_keypoint"), from_keypoint, declared)?;
                require_declared(&at("to_keypoint"), to_keypoint, declared)?;
                if from_keypoint == to_keypoint {
                    return Err(KpamError::validation(at("to_keypoint"), "must differ from from_keypoint"));
                }
                normalize_unit(&at("target_axis"), target_axis)?;
            }
        }
    }

    let mut constraints = doc.constraints;
    for (i, term) in constraints.iter_mut().enumerate() {
        let at = |field: &str| format!("constraints[{i}].{field}");
        require_declared(&at("keypoint"), term.keypoint(), declared)?;
        match term {
            ConstraintTerm::PointTarget { target, tolerance, .. } => {
                require_finite(&at("target"), target)?;
                if !(*tolerance > 0.0 && tolerance.is_finite()) {
                    return Err(KpamError::validation(at("tolerance"), "must be positive"));
                }
            }
            ConstraintTerm::HalfSpace { plane, .. } => normalize_unit(&at("plane.normal"), &mut plane.normal)?,
            ConstraintTerm::WorkspaceBox { min, max, .. } => {
                if (0..3).any(|k| min[k] > max[k]) {
                    return Err(KpamError::validation(at("min"), "must not exceed max componentwise"));
                }
            }
        }
    }

    let mut approach = doc.approach;
    if let Some(a) = &mut approach {
        normalize_unit("approach.direction", &mut a.direction)?;
        if !(a.distance >= 0.0 && a.distance.is_finite()) {
            return Err(KpamError::validation("approach.distance", "must be finite and non-negative"));
        }
    }

    Ok(TaskSpec {
        name: doc.name,
        category: doc.category,
        required_keypoints: doc.required_keypoints,
        costs,
        constraints,
        approach,
    })
}

/// Parses and validates a task specification document.
pub fn parse_task_spec(text: &[u8]) -> Result<TaskSpec> {
    validate(from_json(text)?)
}

/// Canonical pretty-printed JSON; equal specs give identical bytes.
pub fn serialize_task_spec(spec: &TaskSpec) -> Vec<u8> {
    let doc = SpecDocument {
        kpam_spec_version: SPEC_VERSION,
        name: spec.name.clone(),
        category: spec.category.clone(),
        required_keypoints: spec.required_keypoints.clone(),
        costs: spec.costs.clone(),
        constraints: spec.constraints.clone(),
        approach: spec.approach,
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("task spec serializes");
    out.push(b'\n');
    out
}

/// Binds a spec to observed keypoints. Extra keypoints are ignored.
pub fn instantiate_problem(spec: &TaskSpec, kp: &KeypointSet) -> Result<Problem> {
    let missing: Vec<String> = spec.required_keypoints.iter().filter(|n| kp.get(n).is_none()).cloned().collect();
    if !missing.is_empty() {
        return Err(KpamError::MissingKeypoint(missing));
    }
    Problem::new(kp.clone(), spec.costs.clone(), spec.constraints.clone())
}

/// Detected keypoints of one object, as exchanged between tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointObservation {
    pub object_id: String,
    pub category: String,
    pub keypoints: KeypointSet,
}

pub fn parse_observation(text: &[u8]) -> Result<KeypointObservation> {
    from_json(text)
}

pub fn serialize_observation(obs: &KeypointObservation) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(obs).expect("observation serializes");
    out.push(b'\n');
    out
}
