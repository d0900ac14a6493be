//! Closed-form least-squares alignment of corresponding point sets
//! (Kabsch for rigid, Umeyama for similarity).

use nalgebra::{Matrix3, Rotation3, SymmetricEigen, UnitQuaternion};

use crate::error::{KpamError, Result};
use crate::geometry::{KeypointSet, Vec3};

/// Source points whose spread is this small relative to the dominant
/// direction are treated as collinear.
const COLLINEAR_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Alignment {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
    pub scale: f64,
}

/// Pairs up points by name: every name in `source` must appear in `dest`.
pub(crate) fn paired_points(source: &KeypointSet, dest: &KeypointSet) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let mut src = Vec::with_capacity(source.len());
    let mut dst = Vec::with_capacity(source.len());
    let missing: Vec<&str> = source.names().iter().filter(|n| dest.get(n).is_none()).map(String::as_str).collect();
    if !missing.is_empty() {
        return Err(KpamError::NameMismatch(format!("not present in both sets: {}", missing.join(", "))));
    }
    for (name, p) in source.iter() {
        src.push(*p);
        dst.push(*dest.get(name).expect("checked above"));
    }
    Ok((src, dst))
}

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len() as f64
}

fn check_spread(centered: &[Vec3]) -> Result<()> {
    if centered.len() < 3 {
        return Err(KpamError::DegenerateGeometry(format!("need at least 3 points, got {}", centered.len())));
    }
    let cov = centered.iter().fold(Matrix3::zeros(), |acc, p| acc + p * p.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(ev[0] > 0.0) || ev[1] <= COLLINEAR_RATIO * ev[0] {
        return Err(KpamError::DegenerateGeometry("source points are coincident or collinear".into()));
    }
    Ok(())
}

/// Least-squares `dst ≈ s·R·src + t`; `with_scale = false` pins `s = 1`.
pub(crate) fn umeyama(src: &[Vec3], dst: &[Vec3], with_scale: bool) -> Result<Alignment> {
    debug_assert_eq!(src.len(), dst.len());
    let mu_s = centroid(src);
    let mu_d = centroid(dst);
    let cs: Vec<Vec3> = src.iter().map(|p| p - mu_s).collect();
    let cd: Vec<Vec3> = dst.iter().map(|p| p - mu_d).collect();
    check_spread(&cs)?;

    let n = src.len() as f64;
    let sigma = cs.iter().zip(&cd).fold(Matrix3::zeros(), |acc, (s, d)| acc + d * s.transpose()) / n;
    let svd = sigma.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut signs = Vec3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        // singular values are sorted descending; flip the smallest
        signs.z = -1.0;
    }
    let r = u * Matrix3::from_diagonal(&signs) * v_t;
    let scale = if with_scale {
        let var_s = cs.iter().map(|p| p.norm_squared()).sum::<f64>() / n;
        svd.singular_values.component_mul(&signs).sum() / var_s
    } else {
        1.0
    };
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let translation = mu_d - scale * (rotation * mu_s);
    Ok(Alignment { rotation, translation, scale })
}
