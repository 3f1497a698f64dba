//! Cross-module properties of the public API.

use proptest::prelude::*;
use qubo_ct::solver::brute_force;
use qubo_ct::{
    background_subtract, build_qubo, build_system_matrix, decode, encode, energy, estimate_alpha,
    fbp_reconstruct, forward_project, generate_phantom, scale_binary, simulated_anneal,
    threshold_segment, AnnealSchedule, AttenuationSpec, BackgroundRegion, BinaryImage,
    EncodingSpec, Execution, Filter, PhantomKind, ProjectionGeometry, ThresholdMethod, WeightModel,
};

fn mask_strategy(max: usize) -> impl Strategy<Value = BinaryImage> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(0u8..2, w * h)
            .prop_map(move |m| BinaryImage::new(w, h, m).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // an exactly representable sinogram puts the ground truth at -offset
    #[test]
    fn truth_attains_theoretical_minimum(
        mask in mask_strategy(6),
        alpha in 0.5f64..4.0,
        tenths in proptest::collection::btree_set(0u32..1800, 1..5),
    ) {
        let (w, h) = mask.dims();
        let angles = tenths.into_iter().map(|t| f64::from(t) / 10.0).collect();
        let geom = ProjectionGeometry::covering(angles, w, h).unwrap();
        let sm = build_system_matrix(&geom, w, h, WeightModel::AreaOverlap).unwrap();
        let truth = scale_binary(&mask, alpha).unwrap();
        let sino = forward_project(&sm, &truth).unwrap();
        let enc = EncodingSpec::segmentation(AttenuationSpec::single(alpha).unwrap(), w, h).unwrap();
        let model = build_qubo(&sm, &sino, &enc).unwrap();
        let e = energy(&model, &encode(&truth, &enc).unwrap()).unwrap();
        prop_assert!((e + model.offset()).abs() <= 1e-9 * model.offset().max(1.0));
    }

    // annealing never reports an energy below the exhaustive minimum
    #[test]
    fn anneal_is_bounded_by_brute_force(mask in mask_strategy(3), seed in 0u64..1000) {
        let (w, h) = mask.dims();
        let geom = ProjectionGeometry::covering(vec![0.0, 45.0, 90.0], w, h).unwrap();
        let sm = build_system_matrix(&geom, w, h, WeightModel::AreaOverlap).unwrap();
        let sino = forward_project(&sm, &mask.to_grid()).unwrap();
        let enc = EncodingSpec::segmentation(AttenuationSpec::single(1.0).unwrap(), w, h).unwrap();
        let model = build_qubo(&sm, &sino, &enc).unwrap();
        let exact = brute_force(&model, 24).unwrap();
        let sched = AnnealSchedule { sweeps: 50, restarts: 2, seed, ..AnnealSchedule::default() };
        let res = simulated_anneal(&model, &sched).unwrap();
        prop_assert!(res.best_energy >= exact.result.best_energy - 1e-9 * model.offset().max(1.0));
        prop_assert_eq!(res.best_energy, energy(&model, &res.best_assignment).unwrap());
    }
}

#[test]
fn shifted_detector_is_recovered_by_background_subtraction() {
    let mask = generate_phantom(PhantomKind::TwoDisks, 12, 12, 0).unwrap();
    let geom = ProjectionGeometry::covering(ProjectionGeometry::evenly_spaced(12).unwrap(), 12, 12)
        .unwrap();
    let sm = build_system_matrix(&geom, 12, 12, WeightModel::AreaOverlap).unwrap();
    let sino = forward_project(&sm, &scale_binary(&mask, 1.7).unwrap()).unwrap();
    let shifted = sino.map(|v| v + 0.4).unwrap();
    let cleaned = background_subtract(&shifted, &BackgroundRegion::BorderColumns(2)).unwrap();
    for (a, b) in cleaned.values().iter().zip(sino.values()) {
        assert!((a - b).abs() < 1e-12);
    }
    let alpha = estimate_alpha(&cleaned, &sm, &mask).unwrap();
    assert!((alpha - 1.7).abs() < 1e-9);
}

#[test]
fn qubo_and_baseline_agree_on_a_clean_disk() {
    let mask = generate_phantom(PhantomKind::Disk, 12, 12, 0).unwrap();
    let geom = ProjectionGeometry::covering(ProjectionGeometry::evenly_spaced(36).unwrap(), 12, 12)
        .unwrap();
    let sm = build_system_matrix(&geom, 12, 12, WeightModel::AreaOverlap).unwrap();
    let sino = forward_project(&sm, &scale_binary(&mask, 2.0).unwrap()).unwrap();

    let base = threshold_segment(
        &fbp_reconstruct(&sino, &sm, Filter::Ramp).unwrap(),
        ThresholdMethod::Otsu,
    )
    .unwrap();
    let enc = EncodingSpec::segmentation(AttenuationSpec::single(2.0).unwrap(), 12, 12).unwrap();
    let model = build_qubo(&sm, &sino, &enc).unwrap();
    let res = simulated_anneal(&model, &AnnealSchedule::default()).unwrap();
    let seg = decode(&res.best_assignment, &enc).unwrap().above(0.0);
    assert_eq!(seg, mask);
    let m = qubo_ct::compare_segmentations(&seg, &base).unwrap();
    assert!(m.dice >= 0.9, "dice {}", m.dice);
}

#[test]
fn execution_modes_agree_end_to_end() {
    use qubo_ct::projection::{build_system_matrix_with, forward_project_with};
    use qubo_ct::qubo::build_qubo_with;
    use qubo_ct::solver::simulated_anneal_with;

    let mask = generate_phantom(PhantomKind::RandomBlobs, 10, 9, 4).unwrap();
    let geom =
        ProjectionGeometry::covering(ProjectionGeometry::evenly_spaced(7).unwrap(), 10, 9).unwrap();
    let enc = EncodingSpec::segmentation(AttenuationSpec::new(vec![1.0, 2.0], 5.0).unwrap(), 10, 9)
        .unwrap();
    let sched = AnnealSchedule {
        sweeps: 100,
        restarts: 3,
        seed: 1,
        ..AnnealSchedule::default()
    };
    let run = |e: Execution| {
        let sm = build_system_matrix_with(&geom, 10, 9, WeightModel::AreaOverlap, e).unwrap();
        let sino = forward_project_with(&sm, &scale_binary(&mask, 2.0).unwrap(), e).unwrap();
        let model = build_qubo_with(&sm, &sino, &enc, e).unwrap();
        let res = simulated_anneal_with(&model, &sched, e).unwrap();
        (model, res)
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}
