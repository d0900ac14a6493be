//! Category-level pick-and-place targets expressed as costs and constraints
//! on semantic 3D keypoints, solved over rigid transforms.

// `!(x > y)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod alignment;
pub mod baseline;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod harness;
pub mod integral;
pub mod scenarios;
pub mod scenes;
pub mod shipped;
pub mod solver;
pub mod taskspec;
pub mod terms;

pub use baseline::{fit_similarity, pose_based_action, SimilarityTransform, Template};
pub use error::{KpamError, Result};
pub use geometry::{KeypointSet, RigidTransform, Tangent, Vec3};
pub use harness::{run_benchmark, summarize, Benchmark, Method, SuccessPredicate, TrialRecord};
pub use integral::{detect, Heatmap, Intrinsics};
pub use scenes::{generate_scenes, CategoryModel, PoseDistribution, SceneInstance};
pub use solver::{apply_approach_offset, solve, solve_closed_form_points, Problem, SolveResult, SolverConfig};
pub use taskspec::{instantiate_problem, parse_task_spec, serialize_task_spec, TaskSpec};
pub use terms::{evaluate_constraint, evaluate_cost, jacobian, ConstraintTerm, CostTerm, PlaneSpec};
