//! Finite-difference check of every term's analytic derivatives.
//!
//! Both the scalar gradient from [`jacobian`] and each residual row's
//! Jacobian are compared against central differences taken through
//! [`RigidTransform::retract`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{KeypointSet, RigidTransform, Tangent, Vec3};
use crate::solver::random_rotation;
use crate::terms::{
    evaluate_constraint, evaluate_cost, jacobian, ConstraintTerm, CostTerm, PlaneSpec, Residuals, TermRef,
};

pub const FD_STEP: f64 = 1e-6;
pub const MAX_RELATIVE_ERROR: f64 = 1e-5;
/// Lower bound on the denominator of the relative error, so near-zero
/// gradients are compared in absolute terms.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-3;

pub const VARIANTS: [&str; 6] =
    ["point_l2", "point_to_plane", "axis_alignment", "point_target", "half_space", "workspace_box"];

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn relative_error(analytic: &Tangent, numeric: &Tangent) -> f64 {
    (analytic - numeric).norm() / analytic.norm().max(numeric.norm()).max(RELATIVE_ERROR_FLOOR)
}

/// Central difference of `f` along each tangent direction at `t`.
pub fn numeric_gradient(t: &RigidTransform, mut f: impl FnMut(&RigidTransform) -> f64) -> Tangent {
    let mut g = Tangent::zeros();
    for i in 0..6 {
        let mut d = Tangent::zeros();
        d[i] = FD_STEP;
        g[i] = (f(&t.retract(&d)) - f(&t.retract(&-d))) / (2.0 * FD_STEP);
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantReport {
    pub variant: String,
    pub trials: usize,
    pub max_relative_error: f64,
    pub passed: bool,
}

fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    random_rotation(rng) * Vec3::x()
}

fn random_vec<R: Rng>(rng: &mut R, half: f64) -> Vec3 {
    Vec3::from_fn(|_, _| rng.random_range(-half..half))
}

/// A random pose and a three-keypoint set with well separated points.
pub fn random_case<R: Rng>(rng: &mut R) -> (RigidTransform, KeypointSet) {
    let t = RigidTransform::new(random_rotation(rng), random_vec(rng, 1.0));
    loop {
        let pts: Vec<Vec3> = (0..3).map(|_| random_vec(rng, 0.5)).collect();
        if (pts[0] - pts[1]).norm() > 0.05 {
            let names = ["a", "b", "c"].map(String::from).to_vec();
            return (t, KeypointSet::new(names, pts).expect("finite points"));
        }
    }
}

enum AnyTerm {
    Cost(CostTerm),
    Constraint(ConstraintTerm),
}

fn random_term<R: Rng>(rng: &mut R, variant: &str) -> AnyTerm {
    let weight = rng.random_range(0.1..3.0);
    let plane = PlaneSpec::new(random_unit(rng), rng.random_range(-0.5..0.5));
    match variant {
        "point_l2" => AnyTerm::Cost(CostTerm::PointL2 { keypoint: "a".into(), target: random_vec(rng, 1.0), weight }),
        "point_to_plane" => AnyTerm::Cost(CostTerm::PointToPlane { keypoint: "a".into(), plane, weight }),
        "axis_alignment" => AnyTerm::Cost(CostTerm::AxisAlignment {
            from_keypoint: "a".into(),
            to_keypoint: "b".into(),
            target_axis: random_unit(rng),
            weight,
        }),
        "point_target" => AnyTerm::Constraint(ConstraintTerm::PointTarget {
            keypoint: "a".into(),
            target: random_vec(rng, 1.0),
            tolerance: 1e-6,
        }),
        "half_space" => AnyTerm::Constraint(ConstraintTerm::HalfSpace { keypoint: "a".into(), plane }),
        "workspace_box" => {
            let c = random_vec(rng, 1.0);
            let h = Vec3::from_fn(|_, _| rng.random_range(0.05..0.5));
            AnyTerm::Constraint(ConstraintTerm::WorkspaceBox { keypoint: "a".into(), min: c - h, max: c + h })
        }
        other => unreachable!("unknown variant {other}"),
    }
}

fn worst_error_with(
    analytic: Tangent,
    t: &RigidTransform,
    value: impl Fn(&RigidTransform) -> Result<f64>,
    rows: impl Fn(&RigidTransform) -> Result<Residuals>,
) -> Result<f64> {
    let numeric = numeric_gradient(t, |x| value(x).expect("bound once already"));
    let mut worst = relative_error(&analytic, &numeric);
    for (i, row) in rows(t)?.iter().enumerate() {
        let fd = numeric_gradient(t, |x| rows(x).expect("bound once already")[i].value);
        worst = worst.max(relative_error(&row.jacobian, &fd));
    }
    Ok(worst)
}

fn worst_error(term: &AnyTerm, t: &RigidTransform, kp: &KeypointSet) -> Result<f64> {
    match term {
        AnyTerm::Cost(c) => {
            worst_error_with(jacobian(TermRef::Cost(c), t, kp)?, t, |x| evaluate_cost(c, x, kp), |x| c.residuals(x, kp))
        }
        AnyTerm::Constraint(c) => worst_error_with(
            jacobian(TermRef::Constraint(c), t, kp)?,
            t,
            |x| evaluate_constraint(c, x, kp),
            |x| c.components(x, kp),
        ),
    }
}

/// Runs `trials` random cases for every variant.
pub fn run_gradcheck(trials: usize, seed: u64) -> Result<Vec<VariantReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(VARIANTS.len());
    for variant in VARIANTS {
        let mut max_err: f64 = 0.0;
        for _ in 0..trials {
            let (t, kp) = random_case(&mut rng);
            let term = random_term(&mut rng, variant);
            max_err = max_err.max(worst_error(&term, &t, &kp)?);
        }
        out.push(VariantReport {
            variant: variant.to_string(),
            trials,
            max_relative_error: max_err,
            passed: max_err < MAX_RELATIVE_ERROR,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_variants_pass() {
        for r in run_gradcheck(20, 3).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }
}
