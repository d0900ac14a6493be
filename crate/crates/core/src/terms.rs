//! Cost and constraint terms on transformed keypoints.
//!
//! Every term is written as a small set of scalar residual rows, each with its
//! analytic derivative with respect to the local perturbation `[ω, τ]` (see
//! [`crate::geometry`]). A cost term's value is the sum of its squared rows;
//! constraint rows are the raw equality or inequality functions the solver
//! drives to zero (or below zero).
//!
//! Sign conventions:
//! * equality terms are satisfied when their residual is within `tolerance`;
//! * inequality terms are satisfied when their residual is `<= 0`.

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::error::{KpamError, Result};
use crate::geometry::{axis_between, skew, vec3_serde, KeypointSet, RigidTransform, Tangent, Vec3};

/// Default tolerance for point equality constraints, meters.
pub const DEFAULT_EQUALITY_TOLERANCE: f64 = 1e-6;

fn default_weight() -> f64 {
    1.0
}

fn default_tolerance() -> f64 {
    DEFAULT_EQUALITY_TOLERANCE
}

/// Plane `⟨normal, x⟩ = offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    #[serde(with = "vec3_serde")]
    pub normal: Vec3,
    pub offset: f64,
}

impl PlaneSpec {
    pub fn new(normal: Vec3, offset: f64) -> Self {
        Self { normal, offset }
    }

    /// Signed value `⟨n, p⟩ − b`.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// The same plane expressed after moving the world by `g`.
    pub fn transformed(&self, g: &RigidTransform) -> Self {
        let normal = g.rotation() * self.normal;
        Self { normal, offset: self.offset + normal.dot(g.translation()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostTerm {
    /// `w · ‖T·p − target‖²`
    PointL2 {
        keypoint: String,
        #[serde(with = "vec3_serde")]
        target: Vec3,
        #[serde(default = "default_weight")]
        weight: f64,
    },
    /// `w · (⟨n, T·p⟩ − b)²`
    PointToPlane {
        keypoint: String,
        plane: PlaneSpec,
        #[serde(default = "default_weight")]
        weight: f64,
    },
    /// `w · (1 − ⟨v_target, rot(T)·axis(p_from → p_to)⟩)²`
    AxisAlignment {
        from_keypoint: String,
        to_keypoint: String,
        #[serde(with = "vec3_serde")]
        target_axis: Vec3,
        #[serde(default = "default_weight")]
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintTerm {
    /// Equality: `‖T·p − target‖ ≤ tolerance`.
    PointTarget {
        keypoint: String,
        #[serde(with = "vec3_serde")]
        target: Vec3,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    /// Inequality: `⟨n, T·p⟩ − b ≤ 0`.
    HalfSpace { keypoint: String, plane: PlaneSpec },
    /// Inequality: `min ≤ T·p ≤ max` componentwise. Stands in for workspace
    /// limits; no collision geometry is modeled.
    WorkspaceBox {
        keypoint: String,
        #[serde(with = "vec3_serde")]
        min: Vec3,
        #[serde(with = "vec3_serde")]
        max: Vec3,
    },
}

/// One scalar residual and its derivative row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRow {
    pub value: f64,
    pub jacobian: Tangent,
}

pub type Residuals = ArrayVec<ResidualRow, 6>;

/// Derivative of `T·p` component `k` with respect to `[ω, τ]`, given `rp = R·p`.
fn point_row(rp: &Vec3, k: usize) -> Tangent {
    // d(exp(ω)·R·p)/dω = −[R·p]×
    let rq = -skew(rp);
    let mut row = Tangent::zeros();
    row[0] = rq[(k, 0)];
    row[1] = rq[(k, 1)];
    row[2] = rq[(k, 2)];
    row[3 + k] = 1.0;
    row
}

/// Rows of `T·p − target`, with the rotation derivative taken at `R·p`.
fn point_rows(t: &RigidTransform, p: &Vec3, target: &Vec3, scale: f64) -> Residuals {
    let rp = t.rotation() * p;
    let q = rp + t.translation();
    (0..3).map(|k| ResidualRow { value: scale * (q[k] - target[k]), jacobian: scale * point_row(&rp, k) }).collect()
}

fn plane_row(t: &RigidTransform, p: &Vec3, plane: &PlaneSpec, scale: f64) -> ResidualRow {
    let rp = t.rotation() * p;
    let q = rp + t.translation();
    let n = &plane.normal;
    let w = rp.cross(n);
    ResidualRow {
        value: scale * plane.signed_distance(&q),
        jacobian: scale * Tangent::new(w.x, w.y, w.z, n.x, n.y, n.z),
    }
}

/// A cost term with its keypoints resolved.
#[derive(Debug, Clone)]
pub(crate) enum BoundCost {
    PointL2 { p: Vec3, target: Vec3, weight: f64 },
    PointToPlane { p: Vec3, plane: PlaneSpec, weight: f64 },
    AxisAlignment { axis: Vec3, target: Vec3, weight: f64 },
}

impl BoundCost {
    pub(crate) fn residuals(&self, t: &RigidTransform) -> Residuals {
        match self {
            BoundCost::PointL2 { p, target, weight } => point_rows(t, p, target, weight.sqrt()),
            BoundCost::PointToPlane { p, plane, weight } => {
                let mut r = Residuals::new();
                r.push(plane_row(t, p, plane, weight.sqrt()));
                r
            }
            BoundCost::AxisAlignment { axis, target, weight } => {
                let s = weight.sqrt();
                let ra = t.rotation() * axis;
                let c = ra.cross(target);
                let mut r = Residuals::new();
                r.push(ResidualRow {
                    value: s * (1.0 - target.dot(&ra)),
                    jacobian: -s * Tangent::new(c.x, c.y, c.z, 0.0, 0.0, 0.0),
                });
                r
            }
        }
    }

    pub(crate) fn value(&self, t: &RigidTransform) -> f64 {
        self.residuals(t).iter().map(|r| r.value * r.value).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Equality,
    Inequality,
}

/// A constraint term with its keypoint resolved.
#[derive(Debug, Clone)]
pub(crate) enum BoundConstraint {
    PointTarget { p: Vec3, target: Vec3, tolerance: f64 },
    HalfSpace { p: Vec3, plane: PlaneSpec },
    WorkspaceBox { p: Vec3, min: Vec3, max: Vec3 },
}

impl BoundConstraint {
    pub(crate) fn kind(&self) -> ConstraintKind {
        match self {
            BoundConstraint::PointTarget { .. } => ConstraintKind::Equality,
            _ => ConstraintKind::Inequality,
        }
    }

    /// Component rows as seen by the solver: three equalities for a point
    /// target, one inequality for a half space, six for a box.
    pub(crate) fn components(&self, t: &RigidTransform) -> Residuals {
        match self {
            BoundConstraint::PointTarget { p, target, .. } => point_rows(t, p, target, 1.0),
            BoundConstraint::HalfSpace { p, plane } => {
                let mut r = Residuals::new();
                r.push(plane_row(t, p, plane, 1.0));
                r
            }
            BoundConstraint::WorkspaceBox { p, min, max } => {
                let rp = t.rotation() * p;
                let q = rp + t.translation();
                let mut r = Residuals::new();
                for k in 0..3 {
                    let row = point_row(&rp, k);
                    r.push(ResidualRow { value: q[k] - max[k], jacobian: row });
                    r.push(ResidualRow { value: min[k] - q[k], jacobian: -row });
                }
                r
            }
        }
    }

    /// Scalar residual and its gradient.
    pub(crate) fn scalar(&self, t: &RigidTransform) -> ResidualRow {
        let rows = self.components(t);
        match self {
            BoundConstraint::PointTarget { .. } => {
                let value = rows.iter().map(|r| r.value * r.value).sum::<f64>().sqrt();
                let jacobian = if value > 0.0 {
                    rows.iter().fold(Tangent::zeros(), |acc, r| acc + r.jacobian * (r.value / value))
                } else {
                    Tangent::zeros()
                };
                ResidualRow { value, jacobian }
            }
            BoundConstraint::HalfSpace { .. } => rows[0],
            BoundConstraint::WorkspaceBox { .. } => rows
                .iter()
                .copied()
                .fold(None::<ResidualRow>, |best, r| match best {
                    Some(b) if b.value >= r.value => Some(b),
                    _ => Some(r),
                })
                .expect("box has six rows"),
        }
    }

    pub(crate) fn tolerance(&self) -> Option<f64> {
        match self {
            BoundConstraint::PointTarget { tolerance, .. } => Some(*tolerance),
            _ => None,
        }
    }
}

impl CostTerm {
    /// Keypoint names the term reads.
    pub fn keypoints(&self) -> Vec<&str> {
        match self {
            CostTerm::PointL2 { keypoint, .. } | CostTerm::PointToPlane { keypoint, .. } => {
                vec![keypoint.as_str()]
            }
            CostTerm::AxisAlignment { from_keypoint, to_keypoint, .. } => {
                vec![from_keypoint.as_str(), to_keypoint.as_str()]
            }
        }
    }

    pub fn weight(&self) -> f64 {
        match self {
            CostTerm::PointL2 { weight, .. }
            | CostTerm::PointToPlane { weight, .. }
            | CostTerm::AxisAlignment { weight, .. } => *weight,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CostTerm::PointL2 { .. } => "point_l2",
            CostTerm::PointToPlane { .. } => "point_to_plane",
            CostTerm::AxisAlignment { .. } => "axis_alignment",
        }
    }

    pub fn label(&self) -> String {
        format!("{}({})", self.kind_name(), self.keypoints().join("->"))
    }

    pub(crate) fn bind(&self, kp: &KeypointSet) -> Result<BoundCost> {
        Ok(match self {
            CostTerm::PointL2 { keypoint, target, weight } => {
                BoundCost::PointL2 { p: *kp.require(keypoint)?, target: *target, weight: *weight }
            }
            CostTerm::PointToPlane { keypoint, plane, weight } => {
                BoundCost::PointToPlane { p: *kp.require(keypoint)?, plane: *plane, weight: *weight }
            }
            CostTerm::AxisAlignment { from_keypoint, to_keypoint, target_axis, weight } => {
                let axis = axis_between(kp.require(from_keypoint)?, kp.require(to_keypoint)?)?;
                BoundCost::AxisAlignment { axis, target: *target_axis, weight: *weight }
            }
        })
    }

    /// Residual rows whose squares sum to the cost.
    pub fn residuals(&self, t: &RigidTransform, kp: &KeypointSet) -> Result<Residuals> {
        Ok(self.bind(kp)?.residuals(t))
    }

    /// Geometry of the term after moving the world by `g`.
    pub fn transformed(&self, g: &RigidTransform) -> CostTerm {
        let mut out = self.clone();
        match &mut out {
            CostTerm::PointL2 { target, .. } => *target = g.transform_point(target),
            CostTerm::PointToPlane { plane, .. } => *plane = plane.transformed(g),
            CostTerm::AxisAlignment { target_axis, .. } => *target_axis = g.rotation() * *target_axis,
        }
        out
    }
}

impl ConstraintTerm {
    pub fn keypoint(&self) -> &str {
        match self {
            ConstraintTerm::PointTarget { keypoint, .. }
            | ConstraintTerm::HalfSpace { keypoint, .. }
            | ConstraintTerm::WorkspaceBox { keypoint, .. } => keypoint,
        }
    }

    pub fn kind(&self) -> ConstraintKind {
        match self {
            ConstraintTerm::PointTarget { .. } => ConstraintKind::Equality,
            _ => ConstraintKind::Inequality,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConstraintTerm::PointTarget { .. } => "point_target",
            ConstraintTerm::HalfSpace { .. } => "half_space",
            ConstraintTerm::WorkspaceBox { .. } => "workspace_box",
        }
    }

    pub fn label(&self) -> String {
        format!("{}({})", self.kind_name(), self.keypoint())
    }

    pub(crate) fn bind(&self, kp: &KeypointSet) -> Result<BoundConstraint> {
        let p = *kp.require(self.keypoint())?;
        Ok(match self {
            ConstraintTerm::PointTarget { target, tolerance, .. } => {
                BoundConstraint::PointTarget { p, target: *target, tolerance: *tolerance }
            }
            ConstraintTerm::HalfSpace { plane, .. } => BoundConstraint::HalfSpace { p, plane: *plane },
            ConstraintTerm::WorkspaceBox { min, max, .. } => BoundConstraint::WorkspaceBox { p, min: *min, max: *max },
        })
    }

    /// Component rows as used by the solver.
    pub fn components(&self, t: &RigidTransform, kp: &KeypointSet) -> Result<Residuals> {
        Ok(self.bind(kp)?.components(t))
    }

    /// Whether `residual` (from [`evaluate_constraint`]) satisfies the term.
    pub fn is_satisfied(&self, residual: f64, inequality_tolerance: f64) -> bool {
        match self {
            ConstraintTerm::PointTarget { tolerance, .. } => residual.abs() <= *tolerance,
            _ => residual <= inequality_tolerance,
        }
    }

    /// Geometry of the term after moving the world by `g`. An axis-aligned
    /// box only survives translations.
    pub fn transformed(&self, g: &RigidTransform) -> Result<ConstraintTerm> {
        let mut out = self.clone();
        match &mut out {
            ConstraintTerm::PointTarget { target, .. } => *target = g.transform_point(target),
            ConstraintTerm::HalfSpace { plane, .. } => *plane = plane.transformed(g),
            ConstraintTerm::WorkspaceBox { min, max, .. } => {
                if g.rotation().angle() > 0.0 {
                    return Err(KpamError::NotApplicable("workspace box cannot be rotated".into()));
                }
                *min += g.translation();
                *max += g.translation();
            }
        }
        Ok(out)
    }
}

/// Value of a cost term at `t`. Always non-negative.
pub fn evaluate_cost(term: &CostTerm, t: &RigidTransform, kp: &KeypointSet) -> Result<f64> {
    Ok(term.bind(kp)?.value(t))
}

/// Scalar residual of a constraint at `t`.
///
/// Point targets return the distance to the target, half spaces the signed
/// plane value and boxes the largest componentwise violation (`<= 0` inside).
pub fn evaluate_constraint(term: &ConstraintTerm, t: &RigidTransform, kp: &KeypointSet) -> Result<f64> {
    Ok(term.bind(kp)?.scalar(t).value)
}

/// Any term, for the derivative entry point.
#[derive(Debug, Clone, Copy)]
pub enum TermRef<'a> {
    Cost(&'a CostTerm),
    Constraint(&'a ConstraintTerm),
}

impl<'a> From<&'a CostTerm> for TermRef<'a> {
    fn from(t: &'a CostTerm) -> Self {
        TermRef::Cost(t)
    }
}

impl<'a> From<&'a ConstraintTerm> for TermRef<'a> {
    fn from(t: &'a ConstraintTerm) -> Self {
        TermRef::Constraint(t)
    }
}

/// Analytic gradient of the term's scalar value ([`evaluate_cost`] or
/// [`evaluate_constraint`]) with respect to `[ω, τ]` at `t`.
pub fn jacobian<'a>(term: impl Into<TermRef<'a>>, t: &RigidTransform, kp: &KeypointSet) -> Result<Tangent> {
    match term.into() {
        TermRef::Cost(c) => {
            Ok(c.bind(kp)?.residuals(t).iter().fold(Tangent::zeros(), |acc, r| acc + r.jacobian * (2.0 * r.value)))
        }
        TermRef::Constraint(c) => Ok(c.bind(kp)?.scalar(t).jacobian),
    }
}
