//! Test oracles, written independently of the library's own routines.
#![allow(dead_code)]

use nalgebra::{Matrix3, Matrix4, Quaternion, SymmetricEigen, UnitQuaternion};
use rand::Rng;

use kpam_core::{RigidTransform, Tangent, Vec3};

pub fn random_vec<R: Rng>(rng: &mut R, half: f64) -> Vec3 {
    Vec3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half))
}

/// Uniform rotation by rejection sampling in the unit 4-ball.
pub fn random_rotation<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    loop {
        let q = Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 0.1 && n <= 1.0 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

/// Central differences of `f` along left rotation increments and additive
/// translation increments, built directly from axis-angle exponentials.
pub fn numeric_gradient(t: &RigidTransform, h: f64, f: impl Fn(&RigidTransform) -> f64) -> Tangent {
    let shifted = |i: usize, s: f64| {
        let mut d = Vec3::zeros();
        d[i % 3] = s;
        if i < 3 {
            RigidTransform::new(UnitQuaternion::from_scaled_axis(d) * t.rotation(), *t.translation())
        } else {
            RigidTransform::new(*t.rotation(), t.translation() + d)
        }
    };
    Tangent::from_fn(|i, _| (f(&shifted(i, h)) - f(&shifted(i, -h))) / (2.0 * h))
}

/// Horn's closed-form absolute orientation: the optimal rotation is the
/// dominant eigenvector of a 4x4 symmetric matrix built from the
/// cross-covariance.
pub fn horn_alignment(src: &[Vec3], dst: &[Vec3]) -> RigidTransform {
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vec3>() / n;
    let cd = dst.iter().sum::<Vec3>() / n;
    let mut m = Matrix3::zeros();
    for (a, b) in src.iter().zip(dst) {
        m += (a - cs) * (b - cd).transpose();
    }
    let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    #[rustfmt::skip]
    let k = Matrix4::new(
        sxx + syy + szz, syz - szy,       szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz, sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,       -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,       syz + szy,        -sxx - syy + szz,
    );
    let eig = SymmetricEigen::new(k);
    let best = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(best);
    let q = UnitQuaternion::from_quaternion(Quaternion::new(v[0], v[1], v[2], v[3]));
    RigidTransform::new(q, cd - q * cs)
}
