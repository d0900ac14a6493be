//! Batch evaluation of the keypoint planner against the pose baseline.
//!
//! Each method plans from the *observed* keypoints; its action is then
//! applied to the *true* keypoints, so perception noise shows up in the
//! placement errors and predicate outcomes.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{fit_similarity, pose_based_action, Template};
use crate::error::{KpamError, Result};
use crate::geometry::{vec3_serde, KeypointSet, RigidTransform, Vec3};
use crate::scenes::SceneInstance;
use crate::solver::{solve, NamedResidual, SolverConfig};
use crate::taskspec::{instantiate_problem, TaskSpec};
use crate::terms::{ConstraintTerm, CostTerm, PlaneSpec};

/// Placement window for point targets, meters.
pub const DEFAULT_PLACEMENT_RADIUS: f64 = 0.05;
/// Distance from the peg axis within which a handle counts as hung, meters.
pub const DEFAULT_CAPTURE_RADIUS: f64 = 0.01;
/// Allowed penetration below a support plane, meters.
pub const DEFAULT_PENETRATION_MARGIN: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Kpam,
    PoseBaseline,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Kpam => "kpam",
            Method::PoseBaseline => "pose_baseline",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = KpamError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "kpam" => Ok(Method::Kpam),
            "pose_baseline" => Ok(Method::PoseBaseline),
            other => Err(KpamError::Parse(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuccessPredicate {
    /// Keypoint ends within `radius` of `target`.
    PlacementWithin {
        keypoint: String,
        #[serde(with = "vec3_serde")]
        target: Vec3,
        radius: f64,
    },
    /// Handle ends within `capture_radius` of the peg's axis line.
    HandleOnPeg {
        handle_keypoint: String,
        #[serde(with = "vec3_serde")]
        peg_point: Vec3,
        #[serde(with = "vec3_serde")]
        peg_axis: Vec3,
        capture_radius: f64,
    },
    /// No keypoint ends more than `margin` on the forbidden side of `plane`
    /// (same sign convention as a half-space constraint).
    NoPenetration { plane: PlaneSpec, margin: f64 },
}

impl SuccessPredicate {
    pub fn name(&self) -> String {
        match self {
            SuccessPredicate::PlacementWithin { keypoint, .. } => format!("placement_within({keypoint})"),
            SuccessPredicate::HandleOnPeg { handle_keypoint, .. } => format!("handle_on_peg({handle_keypoint})"),
            SuccessPredicate::NoPenetration { plane, .. } => {
                let n = plane.normal;
                format!("no_penetration([{},{},{}];{})", n.x, n.y, n.z, plane.offset)
            }
        }
    }

    /// Measured quantity and pass/fail for keypoints after the action.
    pub fn evaluate(&self, placed: &KeypointSet) -> Result<(f64, bool)> {
        Ok(match self {
            SuccessPredicate::PlacementWithin { keypoint, target, radius } => {
                let d = (placed.require(keypoint)? - target).norm();
                (d, d <= *radius)
            }
            SuccessPredicate::HandleOnPeg { handle_keypoint, peg_point, peg_axis, capture_radius } => {
                let d = distance_to_line(placed.require(handle_keypoint)?, peg_point, peg_axis);
                (d, d <= *capture_radius)
            }
            SuccessPredicate::NoPenetration { plane, margin } => {
                let worst = placed.points().iter().map(|p| plane.signed_distance(p)).fold(f64::NEG_INFINITY, f64::max);
                (worst, worst <= *margin)
            }
        })
    }

    fn keypoint(&self) -> Option<&str> {
        match self {
            SuccessPredicate::PlacementWithin { keypoint, .. } => Some(keypoint),
            SuccessPredicate::HandleOnPeg { handle_keypoint, .. } => Some(handle_keypoint),
            SuccessPredicate::NoPenetration { .. } => None,
        }
    }
}

/// Perpendicular distance from `p` to the line through `origin` along `axis`.
pub fn distance_to_line(p: &Vec3, origin: &Vec3, axis: &Vec3) -> f64 {
    let a = axis.normalize();
    let d = p - origin;
    (d - a * a.dot(&d)).norm()
}

/// Predicates implied by a task:
/// * with an approach direction, each point target is a peg capture along it;
/// * otherwise each point target (or, failing those, each L2 target) gets a
///   placement window;
/// * every distinct half-space plane gets a penetration check.
pub fn default_predicates(spec: &TaskSpec) -> Vec<SuccessPredicate> {
    let mut out = Vec::new();
    let point_targets: Vec<(&str, Vec3)> = spec
        .constraints
        .iter()
        .filter_map(|c| match c {
            ConstraintTerm::PointTarget { keypoint, target, .. } => Some((keypoint.as_str(), *target)),
            _ => None,
        })
        .collect();
    if let Some(approach) = &spec.approach {
        for (k, t) in &point_targets {
            out.push(SuccessPredicate::HandleOnPeg {
                handle_keypoint: k.to_string(),
                peg_point: *t,
                peg_axis: approach.direction,
                capture_radius: DEFAULT_CAPTURE_RADIUS,
            });
        }
    } else {
        let placements: Vec<(&str, Vec3)> = if point_targets.is_empty() {
            spec.costs
                .iter()
                .filter_map(|c| match c {
                    CostTerm::PointL2 { keypoint, target, .. } => Some((keypoint.as_str(), *target)),
                    _ => None,
                })
                .collect()
        } else {
            point_targets
        };
        for (k, t) in placements {
            out.push(SuccessPredicate::PlacementWithin {
                keypoint: k.to_string(),
                target: t,
                radius: DEFAULT_PLACEMENT_RADIUS,
            });
        }
    }
    let mut planes: Vec<PlaneSpec> = Vec::new();
    for c in &spec.constraints {
        if let ConstraintTerm::HalfSpace { plane, .. } = c {
            if !planes.contains(plane) {
                planes.push(*plane);
            }
        }
    }
    out.extend(
        planes.into_iter().map(|plane| SuccessPredicate::NoPenetration { plane, margin: DEFAULT_PENETRATION_MARGIN }),
    );
    out
}

/// Optional random rigid shift applied after the action, about the placed
/// keypoints' centroid. Models the object slipping while it is grasped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspDisturbance {
    pub rotation_sigma_rad: f64,
    pub translation_sigma_m: f64,
    pub seed: u64,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

impl GraspDisturbance {
    fn perturbation(&self, instance_id: &str, method: Method, placed: &KeypointSet) -> RigidTransform {
        let seed = self.seed ^ fnv1a(instance_id) ^ (method as u64).wrapping_mul(0x9e3779b97f4a7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |sigma: f64| {
            if sigma > 0.0 {
                let n = Normal::new(0.0, sigma).expect("finite sigma");
                Vec3::from_fn(|_, _| n.sample(&mut rng))
            } else {
                Vec3::zeros()
            }
        };
        let omega = draw(self.rotation_sigma_rad);
        let tau = draw(self.translation_sigma_m);
        let c = placed.centroid();
        let rot = nalgebra::UnitQuaternion::from_scaled_axis(omega);
        RigidTransform::new(rot, c + tau - rot * c)
    }
}

/// Everything needed to evaluate a task besides the scenes.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub spec: TaskSpec,
    /// Required by [`Method::PoseBaseline`].
    pub template: Option<Template>,
    pub predicates: Vec<SuccessPredicate>,
    pub config: SolverConfig,
    pub disturbance: Option<GraspDisturbance>,
}

impl Benchmark {
    /// Benchmark with [`default_predicates`] and default solver settings.
    pub fn new(spec: TaskSpec, template: Option<Template>) -> Self {
        let predicates = default_predicates(&spec);
        Self { spec, template, predicates, config: SolverConfig::default(), disturbance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateOutcome {
    pub predicate: String,
    pub success: bool,
    /// `None` when the trial failed before an action existed.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub converged: bool,
    pub objective: f64,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub instance_id: String,
    pub method: Method,
    pub action: Option<RigidTransform>,
    pub outcomes: Vec<PredicateOutcome>,
    /// Distance of each targeted keypoint from its target after the action.
    pub placement_errors: Vec<NamedResidual>,
    pub solver: Option<SolverDiagnostics>,
    pub error: Option<String>,
}

/// First point target per keypoint, constraints before costs.
fn keypoint_targets(spec: &TaskSpec) -> Vec<(String, Vec3)> {
    let mut out: Vec<(String, Vec3)> = Vec::new();
    let candidates = spec
        .constraints
        .iter()
        .filter_map(|c| match c {
            ConstraintTerm::PointTarget { keypoint, target, .. } => Some((keypoint, target)),
            _ => None,
        })
        .chain(spec.costs.iter().filter_map(|c| match c {
            CostTerm::PointL2 { keypoint, target, .. } => Some((keypoint, target)),
            _ => None,
        }));
    for (k, t) in candidates {
        if !out.iter().any(|(n, _)| n == k) {
            out.push((k.clone(), *t));
        }
    }
    out
}

/// Observed keypoints restricted to the template's names.
fn template_view(template: &Template, observed: &KeypointSet) -> Result<KeypointSet> {
    let mut names = Vec::with_capacity(template.keypoints.len());
    let mut points = Vec::with_capacity(template.keypoints.len());
    for name in template.keypoints.names() {
        let p = observed
            .get(name)
            .ok_or_else(|| KpamError::NameMismatch(format!("observation lacks template keypoint '{name}'")))?;
        names.push(name.clone());
        points.push(*p);
    }
    KeypointSet::new(names, points)
}

fn plan(
    bench: &Benchmark,
    scene: &SceneInstance,
    method: Method,
) -> Result<(RigidTransform, Option<SolverDiagnostics>)> {
    match method {
        Method::Kpam => {
            let problem = instantiate_problem(&bench.spec, &scene.observed_keypoints)?;
            let r = solve(&problem, &bench.config)?;
            let diag = SolverDiagnostics {
                converged: r.converged,
                objective: r.objective,
                iterations_used: r.iterations_used,
            };
            Ok((r.transform, Some(diag)))
        }
        Method::PoseBaseline => {
            let template = bench
                .template
                .as_ref()
                .ok_or_else(|| KpamError::NotApplicable("pose baseline needs a template".into()))?;
            let observed = template_view(template, &scene.observed_keypoints)?;
            let fitted = fit_similarity(&template.keypoints, &observed)?;
            Ok((pose_based_action(template, &fitted), None))
        }
    }
}

fn run_trial(bench: &Benchmark, targets: &[(String, Vec3)], scene: &SceneInstance, method: Method) -> TrialRecord {
    let failed = |error: String, solver: Option<SolverDiagnostics>| TrialRecord {
        instance_id: scene.instance_id.clone(),
        method,
        action: None,
        outcomes: bench
            .predicates
            .iter()
            .map(|p| PredicateOutcome { predicate: p.name(), success: false, value: None })
            .collect(),
        placement_errors: Vec::new(),
        solver,
        error: Some(error),
    };
    let (action, solver) = match plan(bench, scene, method) {
        Ok(v) => v,
        Err(e) => return failed(e.to_string(), None),
    };
    let mut placed = scene.true_keypoints.transformed(&action);
    if let Some(d) = &bench.disturbance {
        let shift = d.perturbation(&scene.instance_id, method, &placed);
        placed = placed.transformed(&shift);
    }
    let mut outcomes = Vec::with_capacity(bench.predicates.len());
    for p in &bench.predicates {
        match p.evaluate(&placed) {
            Ok((value, success)) => {
                outcomes.push(PredicateOutcome { predicate: p.name(), success, value: Some(value) })
            }
            Err(e) => return failed(e.to_string(), solver),
        }
    }
    let placement_errors = targets
        .iter()
        .filter_map(|(name, target)| {
            placed.get(name).map(|p| NamedResidual { name: name.clone(), value: (p - target).norm() })
        })
        .collect();
    TrialRecord {
        instance_id: scene.instance_id.clone(),
        method,
        action: Some(action),
        outcomes,
        placement_errors,
        solver,
        error: None,
    }
}

/// One record per `(scene, method)`, sorted by instance id then method.
///
/// Per-trial failures (missing keypoints, degenerate fits) are recorded in
/// the trial instead of aborting the batch.
pub fn run_benchmark(scenes: &[SceneInstance], bench: &Benchmark, methods: &[Method]) -> Result<Vec<TrialRecord>> {
    let methods: BTreeSet<Method> = methods.iter().copied().collect();
    if methods.is_empty() {
        return Ok(Vec::new());
    }
    if scenes.is_empty() {
        return Err(KpamError::EmptyInput("no scenes".into()));
    }
    bench.config.validate()?;
    for (i, p) in bench.predicates.iter().enumerate() {
        if let Some(k) = p.keypoint() {
            if !bench.spec.required_keypoints.iter().any(|r| r == k) {
                return Err(KpamError::validation(
                    format!("predicates[{i}]"),
                    format!("keypoint '{k}' is not used by the task"),
                ));
            }
        }
    }
    let targets = keypoint_targets(&bench.spec);
    let jobs: Vec<(&SceneInstance, Method)> =
        scenes.iter().flat_map(|s| methods.iter().map(move |m| (s, *m))).collect();
    let mut records: Vec<TrialRecord> =
        jobs.par_iter().map(|(scene, method)| run_trial(bench, &targets, scene, *method)).collect();
    records.sort_by(|a, b| a.instance_id.cmp(&b.instance_id).then(a.method.cmp(&b.method)));
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessRow {
    pub method: Method,
    pub predicate: String,
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub method: Method,
    pub keypoint: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub success: Vec<SuccessRow>,
    pub errors: Vec<ErrorRow>,
}

/// Mean, median and population standard deviation. Values are sorted first
/// so the result does not depend on input order.
pub fn error_stats(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let std = (dev.iter().sum::<f64>() / n).sqrt();
    let mid = v.len() / 2;
    let median = if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) };
    Some((mean, median, std))
}

/// Success rate per method and predicate; error statistics per method and
/// keypoint (over trials that produced an action).
pub fn summarize(records: &[TrialRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(KpamError::EmptyInput("no trial records".into()));
    }
    let methods: BTreeSet<Method> = records.iter().map(|r| r.method).collect();
    let mut success = Vec::new();
    let mut errors = Vec::new();
    for method in methods {
        let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.method == method).collect();
        let predicates: BTreeSet<&str> =
            mine.iter().flat_map(|r| r.outcomes.iter().map(|o| o.predicate.as_str())).collect();
        for p in predicates {
            let trials = mine.len();
            let successes = mine.iter().filter(|r| r.outcomes.iter().any(|o| o.predicate == p && o.success)).count();
            success.push(SuccessRow {
                method,
                predicate: p.to_string(),
                successes,
                trials,
                rate: successes as f64 / trials as f64,
            });
        }
        let keypoints: BTreeSet<&str> =
            mine.iter().flat_map(|r| r.placement_errors.iter().map(|e| e.name.as_str())).collect();
        for k in keypoints {
            let values: Vec<f64> =
                mine.iter().flat_map(|r| r.placement_errors.iter().filter(|e| e.name == k).map(|e| e.value)).collect();
            if let Some((mean, median, std)) = error_stats(&values) {
                errors.push(ErrorRow { method, keypoint: k.to_string(), count: values.len(), mean, median, std });
            }
        }
    }
    Ok(Summary { success, errors })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Fixed column order: identity, status, solver diagnostics, action
/// (quaternion w,x,y,z then translation), one `ok`/`value` pair per
/// predicate, one error column per targeted keypoint, error message.
pub fn records_to_csv(records: &[TrialRecord]) -> Result<String> {
    let predicates: Vec<String> =
        records.first().map(|r| r.outcomes.iter().map(|o| o.predicate.clone()).collect()).unwrap_or_default();
    let mut keypoints: Vec<String> = Vec::new();
    for r in records {
        for e in &r.placement_errors {
            if !keypoints.contains(&e.name) {
                keypoints.push(e.name.clone());
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "instance_id",
        "method",
        "status",
        "converged",
        "objective",
        "iterations",
        "qw",
        "qx",
        "qy",
        "qz",
        "tx",
        "ty",
        "tz",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for p in &predicates {
        header.push(format!("{p}_ok"));
        header.push(format!("{p}_value"));
    }
    header.extend(keypoints.iter().map(|k| format!("err_{k}")));
    header.push("error".into());
    let csv_err = |e: csv::Error| KpamError::Io(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![
            r.instance_id.clone(),
            r.method.as_str().to_string(),
            if r.error.is_some() { "error".into() } else { "ok".into() },
            r.solver.as_ref().map_or_else(String::new, |s| s.converged.to_string()),
            fmt_opt(r.solver.as_ref().map(|s| s.objective)),
            r.solver.as_ref().map_or_else(String::new, |s| s.iterations_used.to_string()),
        ];
        match &r.action {
            Some(a) => {
                row.extend(a.wxyz().iter().map(f64::to_string));
                row.extend(a.translation().iter().map(f64::to_string));
            }
            None => row.extend(std::iter::repeat_n(String::new(), 7)),
        }
        for p in &predicates {
            let o = r.outcomes.iter().find(|o| &o.predicate == p);
            row.push(o.is_some_and(|o| o.success).to_string());
            row.push(fmt_opt(o.and_then(|o| o.value)));
        }
        for k in &keypoints {
            row.push(fmt_opt(r.placement_errors.iter().find(|e| &e.name == k).map(|e| e.value)));
        }
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| KpamError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| KpamError::Io(e.to_string()))
}

/// Markdown tables for documentation.
pub fn summary_to_markdown(summary: &Summary) -> String {
    let mut out = String::new();
    out.push_str("| method | predicate | successes | trials | rate |\n|---|---|---|---|---|\n");
    for r in &summary.success {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {:.3} |",
            r.method.as_str(),
            r.predicate,
            r.successes,
            r.trials,
            r.rate
        );
    }
    out.push_str("\n| method | keypoint | n | mean (m) | median (m) | std (m) |\n|---|---|---|---|---|---|\n");
    for r in &summary.errors {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {:.5} | {:.5} | {:.5} |",
            r.method.as_str(),
            r.keypoint,
            r.count,
            r.mean,
            r.median,
            r.std
        );
    }
    out
}
