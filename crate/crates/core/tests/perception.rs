mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_rotation, random_vec};
use kpam_core::baseline::{fit_similarity, pose_based_action, SimilarityTransform};
use kpam_core::integral::{backproject, detect, integral_depth, integral_uv, project, Heatmap, Intrinsics};
use kpam_core::scenes::{classify_small_handle, sample_instance, PoseDistribution};
use kpam_core::terms::ConstraintTerm;
use kpam_core::{generate_scenes, shipped, solve, CategoryModel, KeypointSet, KpamError, Problem, SolverConfig, Vec3};

fn sse(s: &SimilarityTransform, src: &KeypointSet, dst: &KeypointSet) -> f64 {
    src.iter().map(|(n, p)| (s.apply(p) - dst.get(n).unwrap()).norm_squared()).sum()
}

#[test]
fn similarity_fit_recovers_ground_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let n = rng.random_range(3..8);
        let names: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let pts: Vec<Vec3> = (0..n).map(|_| random_vec(&mut rng, 0.2)).collect();
        let truth = SimilarityTransform {
            rotation: random_rotation(&mut rng),
            translation: random_vec(&mut rng, 1.0),
            scale: rng.random_range(0.3..3.0),
        };
        let src = KeypointSet::new(names.clone(), pts.clone()).unwrap();
        // Reversed order on the observed side.
        let mut pairs: Vec<(String, Vec3)> = names.into_iter().zip(pts.iter().map(|p| truth.apply(p))).collect();
        pairs.reverse();
        let (dn, dp): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let dst = KeypointSet::new(dn, dp).unwrap();
        let fit = fit_similarity(&src, &dst).unwrap();
        assert!((fit.scale - truth.scale).abs() < 1e-9);
        assert!(fit.rotation.angle_to(&truth.rotation) < 1e-9);
        assert!((fit.translation - truth.translation).norm() < 1e-9);
    }
}

#[test]
fn similarity_fit_beats_random_probes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let names: Vec<String> = (0..5).map(|i| format!("p{i}")).collect();
        let src = KeypointSet::new(names.clone(), (0..5).map(|_| random_vec(&mut rng, 0.2)).collect()).unwrap();
        let dst = KeypointSet::new(names, (0..5).map(|_| random_vec(&mut rng, 0.3)).collect()).unwrap();
        let fit = fit_similarity(&src, &dst).unwrap();
        let best = sse(&fit, &src, &dst);
        for _ in 0..200 {
            let axis = random_vec(&mut rng, 1.0);
            let probe = SimilarityTransform {
                rotation: nalgebra::UnitQuaternion::from_scaled_axis(axis * 0.01) * fit.rotation,
                translation: fit.translation + random_vec(&mut rng, 0.01),
                scale: (fit.scale * (1.0 + rng.random_range(-0.01..0.01))).max(1e-6),
            };
            assert!(best <= sse(&probe, &src, &dst) + 1e-15);
        }
    }
}

#[test]
fn similarity_fit_errors() {
    let a = KeypointSet::from_pairs(&[("a", [0.0, 0.0, 0.0]), ("b", [1.0, 0.0, 0.0]), ("c", [0.0, 1.0, 0.0])]).unwrap();
    let renamed =
        KeypointSet::from_pairs(&[("a", [0.0, 0.0, 0.0]), ("b", [1.0, 0.0, 0.0]), ("x", [0.0, 1.0, 0.0])]).unwrap();
    assert!(matches!(fit_similarity(&a, &renamed), Err(KpamError::NameMismatch(_))));
    let line =
        KeypointSet::from_pairs(&[("a", [0.0, 0.0, 0.0]), ("b", [1.0, 0.0, 0.0]), ("c", [2.0, 0.0, 0.0])]).unwrap();
    assert!(matches!(fit_similarity(&line, &line), Err(KpamError::DegenerateGeometry(_))));
}

#[test]
fn scale_one_baseline_matches_point_target_plan() {
    let template = shipped::template("mug_on_rack").unwrap();
    let model = CategoryModel::mug().with_scale_range(1.0, 1.0);
    for s in generate_scenes(&model, PoseDistribution::Uniform, 0.0, 3, 20).unwrap() {
        let fit = fit_similarity(&template.keypoints, &s.observed_keypoints).unwrap();
        let baseline = pose_based_action(&template, &fit);
        let targets = template.keypoints.transformed(&template.target_pose);
        let constraints = targets
            .iter()
            .map(|(n, t)| ConstraintTerm::PointTarget { keypoint: n.into(), target: *t, tolerance: 1e-6 })
            .collect();
        let p = Problem::new(s.observed_keypoints.clone(), vec![], constraints).unwrap();
        let r = solve(&p, &SolverConfig::default()).unwrap();
        assert!(r.converged);
        let a = s.true_keypoints.transformed(&baseline);
        let b = s.true_keypoints.transformed(&r.transform);
        for (pa, pb) in a.points().iter().zip(b.points()) {
            assert!((pa - pb).norm() < 2e-6, "{}", (pa - pb).norm());
        }
    }
}

#[test]
fn scenes_recover_scale_and_pose() {
    let mug = CategoryModel::mug();
    for s in generate_scenes(&mug, PoseDistribution::Uniform, 0.0, 8, 50).unwrap() {
        assert_eq!(s.true_keypoints.names(), s.observed_keypoints.names());
        let fit = fit_similarity(&mug.canonical_keypoints, &s.observed_keypoints).unwrap();
        assert!((fit.scale - s.applied_scale).abs() < 1e-9);
        assert!(fit.rigid_part().rotation_angle_to(&s.ground_truth_pose) < 1e-9);
        assert!(fit.rigid_part().translation_distance_to(&s.ground_truth_pose) < 1e-9);
    }
}

#[test]
fn noise_statistics() {
    let sigma = 0.005;
    let model = CategoryModel::mug();
    let mut diffs = Vec::new();
    for s in generate_scenes(&model, PoseDistribution::Identity, sigma, 77, 3334).unwrap() {
        for (t, o) in s.true_keypoints.points().iter().zip(s.observed_keypoints.points()) {
            diffs.extend((o - t).iter().copied());
        }
    }
    assert!(diffs.len() >= 30_000);
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let std = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 4.0 * sigma / n.sqrt(), "mean {mean}");
    assert!((std / sigma - 1.0).abs() < 0.03, "std {std}");
}

#[test]
fn scenes_are_reproducible_and_validated() {
    let mug = CategoryModel::mug();
    assert_eq!(
        sample_instance(&mug, PoseDistribution::Mixed, 0.002, 5).unwrap(),
        sample_instance(&mug, PoseDistribution::Mixed, 0.002, 5).unwrap()
    );
    assert!(sample_instance(&mug, PoseDistribution::Mixed, -1.0, 5).is_err());
    let s = sample_instance(&mug.clone().with_scale_range(0.5, 0.5), PoseDistribution::Identity, 0.0, 1).unwrap();
    assert!(classify_small_handle(&s, &mug).unwrap());
    let s = sample_instance(&mug.clone().with_scale_range(1.0, 1.0), PoseDistribution::Identity, 0.0, 1).unwrap();
    assert!(!classify_small_handle(&s, &mug).unwrap());
}

fn dyadic_heatmap(rng: &mut ChaCha8Rng, w: usize, h: usize, support: &[(usize, usize)]) -> Vec<f64> {
    let mut g = vec![0.0; w * h];
    let units = 4096;
    let mut counts = vec![1usize; support.len()];
    for _ in support.len()..units {
        counts[rng.random_range(0..support.len())] += 1;
    }
    for (&(u, v), c) in support.iter().zip(counts) {
        g[v * w + u] += c as f64 / units as f64;
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn integral_shift_equivariance(seed in any::<u64>(), du in 0usize..6, dv in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (16, 16);
        let support: Vec<(usize, usize)> = (0..rng.random_range(1..20))
            .map(|_| (rng.random_range(0..10), rng.random_range(0..10)))
            .collect();
        let shifted: Vec<(usize, usize)> = support.iter().map(|&(u, v)| (u + du, v + dv)).collect();
        let a = dyadic_heatmap(&mut rng.clone(), w, h, &support);
        let b = dyadic_heatmap(&mut rng, w, h, &shifted);
        let ones = vec![1.0; w * h];
        let ha = Heatmap::new(w, h, vec![a], vec![ones.clone()]).unwrap();
        let hb = Heatmap::new(w, h, vec![b], vec![ones]).unwrap();
        let (ua, va) = integral_uv(&ha, 0).unwrap();
        let (ub, vb) = integral_uv(&hb, 0).unwrap();
        prop_assert_eq!((ub, vb), (ua + du as f64, va + dv as f64));
    }

    #[test]
    fn integral_inside_support_hull(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (12, 9);
        let support: Vec<(usize, usize)> = (0..rng.random_range(1..6))
            .map(|_| (rng.random_range(0..w), rng.random_range(0..h)))
            .collect();
        let mut g = vec![0.0; w * h];
        for &(u, v) in &support {
            g[v * w + u] += rng.random_range(0.1..1.0);
        }
        let sum: f64 = g.iter().sum();
        g.iter_mut().for_each(|x| *x /= sum);
        let hm = Heatmap::new(w, h, vec![g], vec![vec![2.0; w * h]]).unwrap();
        let (u, v) = integral_uv(&hm, 0).unwrap();
        let (umin, umax) = support.iter().fold((f64::MAX, f64::MIN), |(a, b), &(x, _)| (a.min(x as f64), b.max(x as f64)));
        let (vmin, vmax) = support.iter().fold((f64::MAX, f64::MIN), |(a, b), &(_, y)| (a.min(y as f64), b.max(y as f64)));
        prop_assert!(u >= umin - 1e-12 && u <= umax + 1e-12);
        prop_assert!(v >= vmin - 1e-12 && v <= vmax + 1e-12);
        if support.len() == 2 {
            let (p, q) = (support[0], support[1]);
            let cross = (q.0 as f64 - p.0 as f64) * (v - p.1 as f64) - (q.1 as f64 - p.1 as f64) * (u - p.0 as f64);
            prop_assert!(cross.abs() < 1e-9);
        }
        prop_assert!((integral_depth(&hm, 0).unwrap() - 2.0).abs() < 1e-12);
    }
}

#[test]
fn backprojection_inverts_projection() {
    let k = Intrinsics { fx: 525.0, fy: 520.0, cx: 319.5, cy: 239.5 };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.2..3.0));
        let (u, v) = project(&p, &k).unwrap();
        assert!((backproject(u, v, p.z, &k).unwrap() - p).norm() < 1e-12);
    }
    assert!(matches!(backproject(1.0, 1.0, 0.0, &k), Err(KpamError::NonPositiveDepth(_))));
}

#[test]
fn detect_on_delta_maps() {
    let k = Intrinsics { fx: 100.0, fy: 100.0, cx: 8.0, cy: 8.0 };
    let (w, h) = (16, 16);
    let mut g = vec![0.0; w * h];
    g[4 * w + 12] = 1.0;
    let mut d = vec![0.0; w * h];
    d[4 * w + 12] = 2.0;
    let hm = Heatmap::new(w, h, vec![g.clone(), vec![1.0 / 256.0; 256]], vec![d, vec![1.0; 256]]).unwrap();
    let pts = detect(&hm, &k).unwrap();
    assert_eq!(pts[0], Vec3::new(0.08, -0.08, 2.0));
    assert_eq!(pts[1], Vec3::new(-0.005, -0.005, 1.0));
    assert!(matches!(integral_uv(&hm, 2), Err(KpamError::IndexOutOfRange { index: 2, len: 2 })));
}
