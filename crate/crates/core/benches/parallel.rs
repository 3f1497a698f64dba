//! Sequential vs parallel execution of the data-parallel kernels.
//!
//! Without the `parallel` feature both variants run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qubo_ct::baseline::fbp_reconstruct_with;
use qubo_ct::projection::{back_project_with, build_system_matrix_with, forward_project_with};
use qubo_ct::qubo::build_qubo_with;
use qubo_ct::solver::simulated_anneal_with;
use qubo_ct::{
    generate_phantom, scale_binary, AnnealSchedule, AttenuationSpec, EncodingSpec, Execution,
    Filter, PhantomKind, ProjectionGeometry, WeightModel,
};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn kernels(c: &mut Criterion) {
    for size in [16usize, 32] {
        let geom = ProjectionGeometry::covering(
            ProjectionGeometry::uniform_angles(5.0).unwrap(),
            size,
            size,
        )
        .unwrap();
        let mask = generate_phantom(PhantomKind::TwoDisks, size, size, 0).unwrap();
        let img = scale_binary(&mask, 2.0).unwrap();
        let sm = build_system_matrix_with(
            &geom,
            size,
            size,
            WeightModel::AreaOverlap,
            Execution::Sequential,
        )
        .unwrap();
        let sino = forward_project_with(&sm, &img, Execution::Sequential).unwrap();
        let enc =
            EncodingSpec::segmentation(AttenuationSpec::single(2.0).unwrap(), size, size).unwrap();

        let mut g = c.benchmark_group(format!("{size}x{size}"));
        g.sample_size(10);
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new("system_matrix", name), &exec, |b, &e| {
                b.iter(|| {
                    build_system_matrix_with(
                        black_box(&geom),
                        size,
                        size,
                        WeightModel::AreaOverlap,
                        e,
                    )
                    .unwrap()
                })
            });
            g.bench_with_input(BenchmarkId::new("forward_project", name), &exec, |b, &e| {
                b.iter(|| forward_project_with(&sm, black_box(&img), e).unwrap())
            });
            g.bench_with_input(BenchmarkId::new("back_project", name), &exec, |b, &e| {
                b.iter(|| back_project_with(&sm, black_box(&sino), e).unwrap())
            });
            g.bench_with_input(BenchmarkId::new("build_qubo", name), &exec, |b, &e| {
                b.iter(|| build_qubo_with(&sm, black_box(&sino), &enc, e).unwrap())
            });
            g.bench_with_input(BenchmarkId::new("fbp", name), &exec, |b, &e| {
                b.iter(|| fbp_reconstruct_with(black_box(&sino), &sm, Filter::Ramp, e).unwrap())
            });
        }
        g.finish();
    }
}

fn annealing(c: &mut Criterion) {
    let size = 16;
    let geom = ProjectionGeometry::covering(
        ProjectionGeometry::uniform_angles(10.0).unwrap(),
        size,
        size,
    )
    .unwrap();
    let sm = build_system_matrix_with(
        &geom,
        size,
        size,
        WeightModel::AreaOverlap,
        Execution::Sequential,
    )
    .unwrap();
    let mask = generate_phantom(PhantomKind::Disk, size, size, 0).unwrap();
    let sino = forward_project_with(
        &sm,
        &scale_binary(&mask, 3.0).unwrap(),
        Execution::Sequential,
    )
    .unwrap();
    let enc =
        EncodingSpec::segmentation(AttenuationSpec::single(3.0).unwrap(), size, size).unwrap();
    let model = build_qubo_with(&sm, &sino, &enc, Execution::Sequential).unwrap();
    let sched = AnnealSchedule {
        sweeps: 200,
        restarts: 4,
        ..AnnealSchedule::default()
    };
    let mut g = c.benchmark_group("anneal_16x16_4_restarts");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| simulated_anneal_with(black_box(&model), &sched, e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, kernels, annealing);
criterion_main!(benches);
