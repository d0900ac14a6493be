//! Constrained minimization over SE(3).
//!
//! Outer loop: augmented Lagrangian with per-row multipliers; inequality
//! rows enter as squared hinges. Inner loop: Levenberg-Marquardt on the
//! 6-dimensional local parameterization. Every piece of the merit function is
//! a sum of squares, so the inner loop only needs residual rows and their
//! Jacobians from [`crate::terms`].

use nalgebra::{Matrix6, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::{paired_points, umeyama};
use crate::error::{KpamError, Result};
use crate::geometry::{ensure_unit, KeypointSet, RigidTransform, Tangent, Vec3};
use crate::terms::{BoundConstraint, BoundCost, ConstraintKind, ConstraintTerm, CostTerm, ResidualRow};

const INITIAL_DAMPING: f64 = 1e-4;
const DAMPING_GROWTH: f64 = 2.0;
const DAMPING_SHRINK: f64 = 3.0;
const MAX_DAMPING: f64 = 1e16;
const MAX_PENALTY: f64 = 1e12;
/// Minimum trust ratio for accepting a step.
const ACCEPT_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub equality_tolerance: f64,
    pub inequality_tolerance: f64,
    pub gradient_tolerance: f64,
    pub multistart_count: usize,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iterations: 20,
            max_inner_iterations: 100,
            initial_penalty: 10.0,
            penalty_growth: 4.0,
            equality_tolerance: 1e-6,
            inequality_tolerance: 1e-6,
            gradient_tolerance: 1e-10,
            multistart_count: 8,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_penalty", self.initial_penalty),
            ("equality_tolerance", self.equality_tolerance),
            ("inequality_tolerance", self.inequality_tolerance),
            ("gradient_tolerance", self.gradient_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(KpamError::InvalidProblem(format!("{name} must be positive")));
            }
        }
        if !(self.penalty_growth > 1.0 && self.penalty_growth.is_finite()) {
            return Err(KpamError::InvalidProblem("penalty_growth must exceed 1".into()));
        }
        if self.max_outer_iterations == 0 || self.max_inner_iterations == 0 || self.multistart_count == 0 {
            return Err(KpamError::InvalidProblem("iteration and start counts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedResidual {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub transform: RigidTransform,
    pub objective: f64,
    pub constraint_residuals: Vec<NamedResidual>,
    pub converged: bool,
    pub starts_tried: usize,
    pub iterations_used: usize,
}

/// Keypoints plus the terms that act on them.
#[derive(Debug, Clone)]
pub struct Problem {
    keypoints: KeypointSet,
    costs: Vec<CostTerm>,
    constraints: Vec<ConstraintTerm>,
    bound_costs: Vec<BoundCost>,
    bound_constraints: Vec<BoundConstraint>,
}

fn check_finite(label: &str, v: &Vec3) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(KpamError::InvalidProblem(format!("{label} has non-finite geometry")))
    }
}

impl Problem {
    pub fn new(keypoints: KeypointSet, costs: Vec<CostTerm>, constraints: Vec<ConstraintTerm>) -> Result<Self> {
        if costs.is_empty() && constraints.is_empty() {
            return Err(KpamError::InvalidProblem("no costs or constraints".into()));
        }
        let invalid = |e: KpamError| KpamError::InvalidProblem(e.to_string());
        let mut bound_costs = Vec::with_capacity(costs.len());
        for c in &costs {
            let w = c.weight();
            if !(w >= 0.0 && w.is_finite()) {
                return Err(KpamError::InvalidProblem(format!("{}: weight must be finite and >= 0", c.label())));
            }
            match c {
                CostTerm::PointL2 { target, .. } => check_finite(&c.label(), target)?,
                CostTerm::PointToPlane { plane, .. } => {
                    ensure_unit(&plane.normal).map_err(invalid)?;
                    check_finite(&c.label(), &(plane.normal * plane.offset))?;
                }
                CostTerm::AxisAlignment { target_axis, .. } => ensure_unit(target_axis).map_err(invalid)?,
            }
            bound_costs.push(c.bind(&keypoints).map_err(invalid)?);
        }
        let mut bound_constraints = Vec::with_capacity(constraints.len());
        for c in &constraints {
            match c {
                ConstraintTerm::PointTarget { target, tolerance, .. } => {
                    check_finite(&c.label(), target)?;
                    if !(*tolerance > 0.0 && tolerance.is_finite()) {
                        return Err(KpamError::InvalidProblem(format!("{}: tolerance must be > 0", c.label())));
                    }
                }
                ConstraintTerm::HalfSpace { plane, .. } => {
                    ensure_unit(&plane.normal).map_err(invalid)?;
                    check_finite(&c.label(), &(plane.normal * plane.offset))?;
                }
                ConstraintTerm::WorkspaceBox { min, max, .. } => {
                    check_finite(&c.label(), min)?;
                    check_finite(&c.label(), max)?;
                    if (0..3).any(|k| min[k] > max[k]) {
                        return Err(KpamError::InvalidProblem(format!("{}: min exceeds max", c.label())));
                    }
                }
            }
            bound_constraints.push(c.bind(&keypoints).map_err(invalid)?);
        }
        Ok(Self { keypoints, costs, constraints, bound_costs, bound_constraints })
    }

    pub fn keypoints(&self) -> &KeypointSet {
        &self.keypoints
    }

    pub fn costs(&self) -> &[CostTerm] {
        &self.costs
    }

    pub fn constraints(&self) -> &[ConstraintTerm] {
        &self.constraints
    }

    /// Summed cost terms at `t`.
    pub fn objective(&self, t: &RigidTransform) -> f64 {
        self.bound_costs.iter().map(|c| c.value(t)).sum()
    }

    /// Scalar residual of every constraint at `t`, labelled.
    pub fn constraint_residuals(&self, t: &RigidTransform) -> Vec<NamedResidual> {
        self.constraints
            .iter()
            .zip(&self.bound_constraints)
            .enumerate()
            .map(|(i, (c, b))| NamedResidual { name: format!("{i}:{}", c.label()), value: b.scalar(t).value })
            .collect()
    }

    fn equality_limit(&self, b: &BoundConstraint, config: &SolverConfig) -> f64 {
        b.tolerance().map_or(config.equality_tolerance, |tol| tol.min(config.equality_tolerance))
    }

    /// Sum of constraint violations beyond tolerance.
    pub fn total_violation(&self, t: &RigidTransform, config: &SolverConfig) -> f64 {
        self.bound_constraints
            .iter()
            .map(|b| {
                let v = b.scalar(t).value;
                match b.kind() {
                    ConstraintKind::Equality => (v.abs() - self.equality_limit(b, config)).max(0.0),
                    ConstraintKind::Inequality => (v - config.inequality_tolerance).max(0.0),
                }
            })
            .sum()
    }

    pub fn is_feasible(&self, t: &RigidTransform, config: &SolverConfig) -> bool {
        self.bound_constraints.iter().all(|b| {
            let v = b.scalar(t).value;
            match b.kind() {
                ConstraintKind::Equality => v.abs() <= self.equality_limit(b, config),
                ConstraintKind::Inequality => v <= config.inequality_tolerance,
            }
        })
    }

    /// Problem with keypoints and every term's geometry moved by `g`.
    pub fn transformed(&self, g: &RigidTransform) -> Result<Problem> {
        Problem::new(
            self.keypoints.transformed(g),
            self.costs.iter().map(|c| c.transformed(g)).collect(),
            self.constraints.iter().map(|c| c.transformed(g)).collect::<Result<_>>()?,
        )
    }

    /// Centroid pair used to seed translations: referenced keypoints and
    /// their point targets.
    fn target_centroids(&self) -> Option<(Vec3, Vec3)> {
        let mut src = Vec3::zeros();
        let mut dst = Vec3::zeros();
        let mut n = 0usize;
        let pairs = self
            .bound_costs
            .iter()
            .filter_map(|c| match c {
                BoundCost::PointL2 { p, target, .. } => Some((p, target)),
                _ => None,
            })
            .chain(self.bound_constraints.iter().filter_map(|c| match c {
                BoundConstraint::PointTarget { p, target, .. } => Some((p, target)),
                _ => None,
            }));
        for (p, target) in pairs {
            src += p;
            dst += target;
            n += 1;
        }
        (n > 0).then(|| (src / n as f64, dst / n as f64))
    }
}

/// Uniform rotation (Shoemake's subgroup algorithm).
pub(crate) fn random_rotation<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    use std::f64::consts::TAU;
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = nalgebra::Quaternion::new(
        b * (TAU * u3).cos(),
        a * (TAU * u2).sin(),
        a * (TAU * u2).cos(),
        b * (TAU * u3).sin(),
    );
    UnitQuaternion::from_quaternion(q)
}

/// The multistart seeds: identity rotation first, then uniform samples.
pub fn initial_transforms(problem: &Problem, config: &SolverConfig) -> Vec<RigidTransform> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let centroids = problem.target_centroids();
    (0..config.multistart_count)
        .map(|i| {
            let rotation = if i == 0 { UnitQuaternion::identity() } else { random_rotation(&mut rng) };
            let translation = match centroids {
                Some((src, dst)) => dst - rotation * src,
                None => Vec3::zeros(),
            };
            RigidTransform::new(rotation, translation)
        })
        .collect()
}

/// Multipliers and penalty of the augmented Lagrangian.
struct Lagrangian {
    multipliers: Vec<f64>,
    penalty: f64,
}

#[derive(Clone, Copy)]
struct Linearization {
    merit: f64,
    hessian: Matrix6<f64>,
    gradient: Tangent,
}

impl Linearization {
    fn zero() -> Self {
        Self { merit: 0.0, hessian: Matrix6::zeros(), gradient: Tangent::zeros() }
    }

    fn push(&mut self, row: &ResidualRow) {
        self.merit += row.value * row.value;
        self.hessian += row.jacobian * row.jacobian.transpose();
        self.gradient += row.jacobian * row.value;
    }
}

struct StartOutcome {
    transform: RigidTransform,
    iterations: usize,
}

struct Engine<'a> {
    problem: &'a Problem,
    config: &'a SolverConfig,
}

impl<'a> Engine<'a> {
    /// Evaluates the merit `Σ r²` (costs plus shifted penalty rows) and, when
    /// asked, its Gauss-Newton normal equations.
    fn linearize(&self, t: &RigidTransform, al: &Lagrangian, with_jacobian: bool) -> Linearization {
        let mut lin = Linearization::zero();
        let mut push = |row: ResidualRow| {
            if with_jacobian {
                lin.push(&row);
            } else {
                lin.merit += row.value * row.value;
            }
        };
        for c in &self.problem.bound_costs {
            for row in c.residuals(t) {
                push(row);
            }
        }
        let mu = al.penalty;
        let s = (0.5 * mu).sqrt();
        let mut m = 0;
        for c in &self.problem.bound_constraints {
            let kind = c.kind();
            for row in c.components(t) {
                let shifted = row.value + al.multipliers[m] / mu;
                m += 1;
                let active = match kind {
                    ConstraintKind::Equality => true,
                    ConstraintKind::Inequality => shifted > 0.0,
                };
                if active {
                    push(ResidualRow { value: s * shifted, jacobian: s * row.jacobian });
                }
            }
        }
        lin
    }

    fn update_multipliers(&self, t: &RigidTransform, al: &mut Lagrangian) {
        let mu = al.penalty;
        let mut m = 0;
        for c in &self.problem.bound_constraints {
            let kind = c.kind();
            for row in c.components(t) {
                let lambda = &mut al.multipliers[m];
                *lambda += mu * row.value;
                if kind == ConstraintKind::Inequality {
                    *lambda = lambda.max(0.0);
                }
                m += 1;
            }
        }
    }

    /// Levenberg-Marquardt on the current merit. Returns the iterate, the
    /// iteration count and whether a stationarity test fired.
    fn inner(&self, mut t: RigidTransform, al: &Lagrangian) -> (RigidTransform, usize, bool) {
        let mut damping = INITIAL_DAMPING;
        let mut lin = self.linearize(&t, al, true);
        for it in 0..self.config.max_inner_iterations {
            if lin.gradient.amax() <= self.config.gradient_tolerance {
                return (t, it, true);
            }
            let max_diag = (0..6).map(|i| lin.hessian[(i, i)]).fold(0.0_f64, f64::max);
            let floor = 1e-9 * max_diag.max(1.0);
            let mut step = None;
            while damping <= MAX_DAMPING {
                let mut a = lin.hessian;
                for i in 0..6 {
                    a[(i, i)] += damping * lin.hessian[(i, i)].max(floor);
                }
                if let Some(chol) = a.cholesky() {
                    step = Some(chol.solve(&(-lin.gradient)));
                    break;
                }
                damping *= DAMPING_GROWTH;
            }
            let Some(delta) = step else {
                return (t, it, true);
            };
            let predicted = -2.0 * lin.gradient.dot(&delta) - (delta.transpose() * lin.hessian * delta)[(0, 0)];
            let candidate = t.retract(&delta);
            let trial = self.linearize(&candidate, al, false).merit;
            let actual = lin.merit - trial;
            let small_step = delta.norm() <= 1e-14 * (1.0 + t.translation().norm());
            if predicted > 0.0 && actual / predicted > ACCEPT_RATIO {
                t = candidate;
                lin = self.linearize(&t, al, true);
                damping = (damping / DAMPING_SHRINK).max(1e-12);
                if small_step || actual <= 1e-18 * lin.merit.max(f64::MIN_POSITIVE) {
                    return (t, it + 1, true);
                }
            } else {
                if small_step || !(predicted > 0.0) {
                    return (t, it + 1, true);
                }
                damping *= DAMPING_GROWTH;
                if damping > MAX_DAMPING {
                    return (t, it + 1, true);
                }
            }
        }
        (t, self.config.max_inner_iterations, false)
    }

    fn max_violation(&self, t: &RigidTransform) -> f64 {
        self.problem
            .bound_constraints
            .iter()
            .map(|b| {
                let v = b.scalar(t).value;
                match b.kind() {
                    ConstraintKind::Equality => v.abs(),
                    ConstraintKind::Inequality => v.max(0.0),
                }
            })
            .fold(0.0, f64::max)
    }

    fn run(&self, start: RigidTransform) -> StartOutcome {
        let rows: usize = self.problem.bound_constraints.iter().map(|c| c.components(&start).len()).sum();
        let mut al = Lagrangian { multipliers: vec![0.0; rows], penalty: self.config.initial_penalty };
        let mut t = start;
        let mut iterations = 0;
        let mut previous = f64::INFINITY;
        for _ in 0..self.config.max_outer_iterations {
            let (next, used, stationary) = self.inner(t, &al);
            t = next;
            iterations += used;
            if rows == 0 {
                if stationary {
                    break;
                }
                continue;
            }
            if stationary && self.problem.is_feasible(&t, self.config) {
                break;
            }
            let violation = self.max_violation(&t);
            self.update_multipliers(&t, &mut al);
            if violation > 0.25 * previous {
                al.penalty = (al.penalty * self.config.penalty_growth).min(MAX_PENALTY);
            }
            previous = violation;
        }
        StartOutcome { transform: t, iterations }
    }
}

/// Minimizes the summed costs subject to the constraints, from several
/// starting rotations, and keeps the best result.
///
/// Feasible results win over infeasible ones; among feasible results the
/// lowest objective wins, otherwise the lowest total violation. Ties go to the
/// earlier start, so the outcome is a pure function of `(problem, config)`.
pub fn solve(problem: &Problem, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let engine = Engine { problem, config };
    let starts = initial_transforms(problem, config);

    let mut best: Option<(bool, f64, StartOutcome)> = None;
    for start in &starts {
        let outcome = engine.run(*start);
        let feasible = problem.is_feasible(&outcome.transform, config);
        let score = if feasible {
            problem.objective(&outcome.transform)
        } else {
            problem.total_violation(&outcome.transform, config)
        };
        let better = match &best {
            None => true,
            Some((best_feasible, best_score, _)) => match (feasible, *best_feasible) {
                (true, false) => true,
                (false, true) => false,
                _ => score < *best_score,
            },
        };
        if better {
            best = Some((feasible, score, outcome));
        }
    }
    let (converged, _, outcome) = best.expect("at least one start");
    let transform = outcome.transform;
    Ok(SolveResult {
        transform,
        objective: problem.objective(&transform),
        constraint_residuals: problem.constraint_residuals(&transform),
        converged,
        starts_tried: starts.len(),
        iterations_used: outcome.iterations,
    })
}

/// Least-squares rigid alignment (no scale) of `source` onto `targets`,
/// pairing points by name.
pub fn solve_closed_form_points(source: &KeypointSet, targets: &KeypointSet) -> Result<RigidTransform> {
    let (src, dst) = paired_points(source, targets)?;
    let a = umeyama(&src, &dst, false)?;
    Ok(RigidTransform::new(a.rotation, a.translation))
}

/// Shifts `t` by `distance` along `direction`; rotation untouched.
pub fn apply_approach_offset(t: &RigidTransform, direction: &Vec3, distance: f64) -> Result<RigidTransform> {
    ensure_unit(direction)?;
    if !(distance >= 0.0 && distance.is_finite()) {
        return Err(KpamError::InvalidProblem(format!("approach distance {distance} must be >= 0")));
    }
    Ok(RigidTransform::new(*t.rotation(), t.translation() + direction * distance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::PlaneSpec;

    fn mug_on_side() -> KeypointSet {
        KeypointSet::from_pairs(&[("bottom_center", [0.3, 0.1, 0.04]), ("top_center", [0.4, 0.1, 0.04])]).unwrap()
    }

    fn mug_upright_problem(kp: KeypointSet) -> Problem {
        Problem::new(
            kp,
            vec![CostTerm::AxisAlignment {
                from_keypoint: "bottom_center".into(),
                to_keypoint: "top_center".into(),
                target_axis: Vec3::z(),
                weight: 1.0,
            }],
            vec![ConstraintTerm::PointTarget {
                keypoint: "bottom_center".into(),
                target: Vec3::new(0.6, 0.0, 0.25),
                tolerance: 1e-6,
            }],
        )
        .unwrap()
    }

    #[test]
    fn keypoints_already_at_targets() {
        let kp = KeypointSet::from_pairs(&[("a", [0.1, 0.2, 0.3]), ("b", [-0.1, 0.0, 0.5])]).unwrap();
        let costs = kp.iter().map(|(n, p)| CostTerm::PointL2 { keypoint: n.into(), target: *p, weight: 1.0 }).collect();
        let problem = Problem::new(kp, costs, vec![]).unwrap();
        let r = solve(&problem, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.objective < 1e-20);
        assert!(r.transform.rotation_angle_to(&RigidTransform::identity()) < 1e-9);
        assert!(r.transform.translation().norm() < 1e-9);
    }

    #[test]
    fn mug_upright_from_side() {
        let problem = mug_upright_problem(mug_on_side());
        let r = solve(&problem, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.constraint_residuals[0].value <= 1e-6);
        assert!(r.objective <= 1e-8);
        assert_eq!(r.starts_tried, 8);
    }

    #[test]
    fn half_space_keeps_points_above() {
        let kp = KeypointSet::from_pairs(&[("a", [0.0, 0.0, -0.2]), ("b", [0.1, 0.0, -0.3])]).unwrap();
        let above = PlaneSpec::new(-Vec3::z(), 0.0);
        let problem = Problem::new(
            kp,
            vec![CostTerm::PointL2 { keypoint: "a".into(), target: Vec3::new(0.0, 0.0, -1.0), weight: 1.0 }],
            vec![
                ConstraintTerm::HalfSpace { keypoint: "a".into(), plane: above },
                ConstraintTerm::HalfSpace { keypoint: "b".into(), plane: above },
            ],
        )
        .unwrap();
        let r = solve(&problem, &SolverConfig::default()).unwrap();
        assert!(r.converged, "{r:?}");
        for res in &r.constraint_residuals {
            assert!(res.value <= 1e-6, "{res:?}");
        }
    }

    #[test]
    fn workspace_box_is_enforced() {
        let kp = KeypointSet::from_pairs(&[("a", [0.0, 0.0, 0.0])]).unwrap();
        let problem = Problem::new(
            kp,
            vec![CostTerm::PointL2 { keypoint: "a".into(), target: Vec3::new(2.0, 0.0, 0.0), weight: 1.0 }],
            vec![ConstraintTerm::WorkspaceBox {
                keypoint: "a".into(),
                min: Vec3::new(-1.0, -1.0, -1.0),
                max: Vec3::new(1.0, 1.0, 1.0),
            }],
        )
        .unwrap();
        let r = solve(&problem, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        let p = r.transform.transform_point(&Vec3::zeros());
        assert!((p.x - 1.0).abs() < 1e-5, "{p:?}");
    }

    #[test]
    fn invalid_problems() {
        let kp = mug_on_side();
        assert!(matches!(Problem::new(kp.clone(), vec![], vec![]), Err(KpamError::InvalidProblem(_))));
        let dangling = vec![CostTerm::PointL2 { keypoint: "handle_center".into(), target: Vec3::zeros(), weight: 1.0 }];
        assert!(matches!(Problem::new(kp.clone(), dangling, vec![]), Err(KpamError::InvalidProblem(_))));
        let negative = vec![CostTerm::PointL2 { keypoint: "top_center".into(), target: Vec3::zeros(), weight: -1.0 }];
        assert!(Problem::new(kp, negative, vec![]).is_err());
    }

    #[test]
    fn config_validation() {
        let problem = mug_upright_problem(mug_on_side());
        let bad = SolverConfig { penalty_growth: 1.0, ..SolverConfig::default() };
        assert!(solve(&problem, &bad).is_err());
    }

    #[test]
    fn approach_offset_cases() {
        let id = RigidTransform::identity();
        let shifted = apply_approach_offset(&id, &Vec3::x(), 0.1).unwrap();
        assert_eq!(*shifted.translation(), Vec3::new(0.1, 0.0, 0.0));
        let t = RigidTransform::new(UnitQuaternion::from_euler_angles(0.2, 0.3, 0.4), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(apply_approach_offset(&t, &Vec3::y(), 0.0).unwrap(), t);
        assert_eq!(apply_approach_offset(&t, &Vec3::y(), 0.5).unwrap().rotation(), t.rotation());
        assert!(matches!(
            apply_approach_offset(&t, &Vec3::new(0.0, 2.0, 0.0), 0.1),
            Err(KpamError::NonUnitDirection { .. })
        ));
    }

    #[test]
    fn closed_form_rejects_collinear() {
        let line = KeypointSet::from_pairs(&[("a", [0.0; 3]), ("b", [1.0, 0.0, 0.0]), ("c", [2.0, 0.0, 0.0])]).unwrap();
        assert!(matches!(solve_closed_form_points(&line, &line), Err(KpamError::DegenerateGeometry(_))));
        let two = KeypointSet::from_pairs(&[("a", [0.0; 3]), ("b", [1.0, 0.0, 0.0])]).unwrap();
        assert!(matches!(solve_closed_form_points(&two, &two), Err(KpamError::DegenerateGeometry(_))));
    }
}
