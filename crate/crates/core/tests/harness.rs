use kpam_core::harness::{
    records_to_csv, summarize, summary_to_markdown, Benchmark, GraspDisturbance, Method, SuccessPredicate,
};
use kpam_core::scenes::PoseDistribution;
use kpam_core::{generate_scenes, run_benchmark, shipped, CategoryModel, KpamError};

fn bench(task: &str) -> Benchmark {
    Benchmark::new(shipped::task_spec(task).unwrap(), Some(shipped::template(task).unwrap()))
}

#[test]
fn noise_free_upright_mugs_always_succeed() {
    let scenes = generate_scenes(&CategoryModel::mug(), PoseDistribution::Mixed, 0.0, 1, 40).unwrap();
    let b = bench("mug_upright");
    assert!(matches!(&b.predicates[..], [SuccessPredicate::PlacementWithin { radius, .. }] if *radius == 0.05));
    let records = run_benchmark(&scenes, &b, &[Method::Kpam]).unwrap();
    assert_eq!(records.len(), 40);
    let summary = summarize(&records).unwrap();
    assert_eq!(summary.success[0].rate, 1.0);
    for r in &records {
        // Zero noise: the targeted keypoint lands within the equality tolerance.
        let e = r.placement_errors.iter().find(|e| e.name == "bottom_center").unwrap();
        assert!(e.value <= 1e-6 + 1e-9, "{}", e.value);
    }
}

#[test]
fn small_mugs_miss_the_peg_with_the_pose_baseline() {
    let model = CategoryModel::mug().with_scale_range(0.6, 0.6);
    let scenes = generate_scenes(&model, PoseDistribution::Mixed, 0.0, 2, 20).unwrap();
    let records = run_benchmark(&scenes, &bench("mug_on_rack"), &[Method::Kpam, Method::PoseBaseline]).unwrap();
    let summary = summarize(&records).unwrap();
    let rate = |m: Method| {
        summary.success.iter().find(|r| r.method == m && r.predicate.starts_with("handle_on_peg")).unwrap().rate
    };
    assert_eq!(rate(Method::PoseBaseline), 0.0);
    assert_eq!(rate(Method::Kpam), 1.0);
}

#[test]
fn empty_inputs() {
    let scenes = generate_scenes(&CategoryModel::mug(), PoseDistribution::Upright, 0.0, 3, 2).unwrap();
    assert!(run_benchmark(&scenes, &bench("mug_upright"), &[]).unwrap().is_empty());
    assert!(matches!(run_benchmark(&[], &bench("mug_upright"), &[Method::Kpam]), Err(KpamError::EmptyInput(_))));
}

#[test]
fn batch_output_is_deterministic_and_sorted() {
    let scenes = generate_scenes(&CategoryModel::shoe(), PoseDistribution::Mixed, 0.003, 4, 15).unwrap();
    let b = bench("shoe_on_rack");
    let run = || records_to_csv(&run_benchmark(&scenes, &b, &[Method::PoseBaseline, Method::Kpam]).unwrap()).unwrap();
    let first = run();
    assert_eq!(first, run());
    let mut reversed = scenes.clone();
    reversed.reverse();
    let again = records_to_csv(&run_benchmark(&reversed, &b, &[Method::Kpam, Method::PoseBaseline]).unwrap()).unwrap();
    assert_eq!(first, again);
    let header = first.lines().next().unwrap();
    assert!(header.starts_with("instance_id,method,status,converged,objective,iterations,qw,qx,qy,qz,tx,ty,tz,"));
    assert!(header.ends_with(",error"));
    assert_eq!(first.lines().nth(1).unwrap().split(',').take(2).collect::<Vec<_>>(), ["shoe-00000", "kpam"]);
}

#[test]
fn summary_is_permutation_invariant() {
    let scenes = generate_scenes(&CategoryModel::mug(), PoseDistribution::Mixed, 0.004, 5, 25).unwrap();
    let mut records = run_benchmark(&scenes, &bench("mug_on_table"), &[Method::Kpam, Method::PoseBaseline]).unwrap();
    let a = summarize(&records).unwrap();
    records.reverse();
    records.swap(3, 17);
    assert_eq!(summarize(&records).unwrap(), a);
    let md = summary_to_markdown(&a);
    assert!(md.contains("| kpam | no_penetration("));
}

#[test]
fn per_trial_failures_are_recorded() {
    // Shoe keypoints cannot satisfy a mug task.
    let scenes = generate_scenes(&CategoryModel::shoe(), PoseDistribution::Upright, 0.0, 6, 3).unwrap();
    let mut b = bench("mug_upright");
    b.predicates.clear();
    let records = run_benchmark(&scenes, &b, &[Method::Kpam, Method::PoseBaseline]).unwrap();
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| r.error.is_some() && r.action.is_none()));
    assert!(records_to_csv(&records).unwrap().lines().skip(1).all(|l| l.contains(",error,")));
}

#[test]
fn missing_template_is_a_trial_error() {
    let scenes = generate_scenes(&CategoryModel::mug(), PoseDistribution::Upright, 0.0, 7, 2).unwrap();
    let mut b = bench("mug_upright");
    b.template = None;
    let records = run_benchmark(&scenes, &b, &[Method::PoseBaseline]).unwrap();
    assert!(records.iter().all(|r| r.error.as_deref().is_some_and(|e| e.contains("template"))));
}

#[test]
fn grasp_disturbance_is_seeded() {
    let scenes = generate_scenes(&CategoryModel::mug(), PoseDistribution::Upright, 0.0, 8, 10).unwrap();
    let mut b = bench("mug_upright");
    let clean = run_benchmark(&scenes, &b, &[Method::Kpam]).unwrap();
    b.disturbance = Some(GraspDisturbance { rotation_sigma_rad: 0.05, translation_sigma_m: 0.01, seed: 1 });
    let noisy = run_benchmark(&scenes, &b, &[Method::Kpam]).unwrap();
    assert_eq!(noisy, run_benchmark(&scenes, &b, &[Method::Kpam]).unwrap());
    let err = |rs: &[kpam_core::TrialRecord]| rs.iter().map(|r| r.placement_errors[0].value).sum::<f64>();
    assert!(err(&noisy) > err(&clean) + 1e-3);
}

#[test]
fn predicates_must_reference_task_keypoints() {
    let scenes = generate_scenes(&CategoryModel::mug(), PoseDistribution::Upright, 0.0, 9, 1).unwrap();
    let mut b = bench("mug_upright");
    b.predicates.push(SuccessPredicate::PlacementWithin {
        keypoint: "lid".into(),
        target: Default::default(),
        radius: 0.1,
    });
    assert!(matches!(run_benchmark(&scenes, &b, &[Method::Kpam]), Err(KpamError::Validation { .. })));
}
