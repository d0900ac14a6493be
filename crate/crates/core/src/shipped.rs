//! Task specifications and templates that ship with the crate.
//!
//! World frame: z up, table plane at z = 0. Rack and shelf positions below are
//! fixed repository constants; only the term structure of each task follows
//! the published task descriptions.
//!
//! | task           | keypoints                          | targets                                     |
//! |----------------|------------------------------------|---------------------------------------------|
//! | `mug_upright`  | bottom_center, top_center          | bottom at (0.6, 0, 0.25), axis +z           |
//! | `mug_on_rack`  | + handle_center                    | handle on peg (0.55, 0, 0.30), peg axis +y  |
//! | `shoe_on_rack` | p1..p6                             | rack surface z = 0.40                       |
//! | `mug_on_table` | bottom, top, handle                | bottom at (0.5, 0, 0), stays above z = 0    |
//!
//! Mug templates use a rim-centered frame (origin at `top_center`).

use crate::baseline::{parse_template, Template};
use crate::error::{KpamError, Result};
use crate::taskspec::{parse_task_spec, TaskSpec};

pub const SHIPPED_TASKS: [&str; 4] = ["mug_upright", "mug_on_rack", "shoe_on_rack", "mug_on_table"];

fn spec_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "mug_upright" => include_str!("../specs/mug_upright.json"),
        "mug_on_rack" => include_str!("../specs/mug_on_rack.json"),
        "shoe_on_rack" => include_str!("../specs/shoe_on_rack.json"),
        "mug_on_table" => include_str!("../specs/mug_on_table.json"),
        _ => return None,
    })
}

fn template_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "mug_upright" => include_str!("../specs/templates/mug_upright.json"),
        "mug_on_rack" => include_str!("../specs/templates/mug_on_rack.json"),
        "shoe_on_rack" => include_str!("../specs/templates/shoe_on_rack.json"),
        "mug_on_table" => include_str!("../specs/templates/mug_on_table.json"),
        _ => return None,
    })
}

/// Raw JSON of a shipped task spec.
pub fn task_spec_json(name: &str) -> Result<&'static str> {
    spec_source(name).ok_or_else(|| KpamError::NotApplicable(format!("no shipped task '{name}'")))
}

pub fn task_spec(name: &str) -> Result<TaskSpec> {
    parse_task_spec(task_spec_json(name)?.as_bytes())
}

pub fn template(name: &str) -> Result<Template> {
    let text =
        template_source(name).ok_or_else(|| KpamError::NotApplicable(format!("no shipped template '{name}'")))?;
    parse_template(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::{ConstraintTerm, CostTerm};

    #[test]
    fn all_shipped_files_load() {
        for name in SHIPPED_TASKS {
            let spec = task_spec(name).unwrap();
            assert_eq!(spec.name, name);
            let t = template(name).unwrap();
            assert_eq!(t.category, spec.category);
            for k in &spec.required_keypoints {
                assert!(t.keypoints.get(k).is_some(), "{name}: template lacks {k}");
            }
        }
    }

    #[test]
    fn mug_upright_structure() {
        let spec = task_spec("mug_upright").unwrap();
        assert_eq!(spec.constraints.len(), 1);
        assert!(
            matches!(&spec.constraints[0], ConstraintTerm::PointTarget { keypoint, .. } if keypoint == "bottom_center")
        );
        assert_eq!(spec.costs.len(), 1);
        assert!(matches!(&spec.costs[0],
            CostTerm::AxisAlignment { from_keypoint, to_keypoint, target_axis, .. }
            if from_keypoint == "bottom_center" && to_keypoint == "top_center" && *target_axis == crate::Vec3::z()));
    }

    #[test]
    fn shoe_on_rack_structure() {
        let spec = task_spec("shoe_on_rack").unwrap();
        let l2: Vec<&str> = spec
            .costs
            .iter()
            .filter_map(|c| match c {
                CostTerm::PointL2 { keypoint, .. } => Some(keypoint.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(l2, ["p1", "p2", "p3", "p4"]);
        let plane: Vec<&str> = spec
            .costs
            .iter()
            .filter_map(|c| match c {
                CostTerm::PointToPlane { keypoint, .. } => Some(keypoint.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(plane, ["p2", "p3", "p4"]);
        let half: Vec<&str> = spec
            .constraints
            .iter()
            .filter_map(|c| match c {
                ConstraintTerm::HalfSpace { keypoint, .. } => Some(keypoint.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(half, ["p1", "p2", "p3", "p4", "p5", "p6"]);
    }

    #[test]
    fn mug_on_rack_structure() {
        let spec = task_spec("mug_on_rack").unwrap();
        assert!(
            matches!(&spec.constraints[..], [ConstraintTerm::PointTarget { keypoint, .. }] if keypoint == "handle_center")
        );
        assert_eq!(spec.costs.len(), 2);
        let approach = spec.approach.unwrap();
        assert_eq!(approach.distance, 0.1);
    }

    #[test]
    fn unknown_name() {
        assert!(task_spec("mug_in_dishwasher").is_err());
    }
}
