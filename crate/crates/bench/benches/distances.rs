use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hgp_bench::{circle, perturbed_grid};
use hgp_core::metricspace::{border_distance, distance_matrix, hausdorff, DistanceOptions};

fn pairs(c: &mut Criterion) {
    let a = circle(0.0, 2.0);
    let b = circle(2.3, 1.2);
    c.bench_function("hausdorff/overlapping_circles", |bench| {
        bench.iter(|| hausdorff(&a, &b, 0.05))
    });
    c.bench_function("border/overlapping_circles", |bench| {
        bench.iter(|| border_distance(&a, &b))
    });
}

fn matrices(c: &mut Criterion) {
    let mut group = c.benchmark_group("distance_matrix");
    group.sample_size(10);
    for k in [6usize, 10] {
        let gs = perturbed_grid(k);
        group.bench_with_input(BenchmarkId::from_parameter(k * k), &gs, |bench, gs| {
            bench.iter(|| distance_matrix(gs, &DistanceOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pairs, matrices);
criterion_main!(benches);
