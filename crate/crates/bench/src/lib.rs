//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kpam_core::integral::Heatmap;
use kpam_core::scenes::{sample_instance, PoseDistribution};
use kpam_core::{shipped, CategoryModel, CostTerm, KeypointSet, Problem, RigidTransform, Vec3};

fn random_vec(rng: &mut ChaCha8Rng, half: f64) -> Vec3 {
    Vec3::from_fn(|_, _| rng.random_range(-half..half))
}

/// Four keypoints with point-to-point costs onto a rigidly moved copy.
pub fn procrustes_problem(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..4).map(|i| format!("k{i}")).collect();
    let points: Vec<Vec3> = (0..4).map(|_| random_vec(&mut rng, 0.2)).collect();
    let axis = random_vec(&mut rng, 1.0);
    let motion = RigidTransform::from_axis_angle(&axis, rng.random_range(0.0..3.0))
        * RigidTransform::from_translation(random_vec(&mut rng, 0.5));
    let costs = names
        .iter()
        .zip(&points)
        .map(|(n, p)| CostTerm::PointL2 { keypoint: n.clone(), target: motion.transform_point(p), weight: 1.0 })
        .collect();
    Problem::new(KeypointSet::new(names, points).expect("finite"), costs, Vec::new()).expect("valid problem")
}

/// The shipped mug-upright task on a noise-free, side-lying mug.
pub fn mug_upright_problem(seed: u64) -> Problem {
    let scene = sample_instance(&CategoryModel::mug(), PoseDistribution::SideLying, 0.0, seed).expect("valid model");
    let spec = shipped::task_spec("mug_upright").expect("shipped spec");
    kpam_core::instantiate_problem(&spec, &scene.observed_keypoints).expect("keypoints present")
}

/// Normalized random heatmap with `keypoints` channels.
pub fn random_heatmap(width: usize, height: usize, keypoints: usize, seed: u64) -> Heatmap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probability = Vec::with_capacity(keypoints);
    let mut depth = Vec::with_capacity(keypoints);
    for _ in 0..keypoints {
        let raw: Vec<f64> = (0..width * height).map(|_| rng.random::<f64>()).collect();
        let sum: f64 = raw.iter().sum();
        probability.push(raw.into_iter().map(|x| x / sum).collect());
        depth.push((0..width * height).map(|_| rng.random_range(0.5..2.0)).collect());
    }
    Heatmap::new(width, height, probability, depth).expect("valid heatmap")
}
