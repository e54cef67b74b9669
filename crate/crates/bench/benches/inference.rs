use criterion::{criterion_group, criterion_main, Criterion};
use hgp_bench::perturbed_grid;
use hgp_core::covariance::{chol_with_jitter, correlation_matrix, CorrelationModel, Smoothness};
use hgp_core::geometry::derive_adjacency;
use hgp_core::inference::{fit, Likelihood, ModelData, ModelSpec, RandomEffect, SpatialInput};
use hgp_core::metricspace::{distance_matrix, DistanceOptions};
use hgp_core::icar_structure;
use nalgebra::DMatrix;

fn factorization(c: &mut Criterion) {
    let gs = perturbed_grid(12);
    let d = distance_matrix(&gs, &DistanceOptions::default()).unwrap();
    for s in [Smoothness::Half, Smoothness::Infinite] {
        let r = correlation_matrix(&CorrelationModel::new(s, 4.0).unwrap(), &d);
        c.bench_function(&format!("cholesky/{}_144", s.label()), |bench| {
            bench.iter(|| chol_with_jitter(&r).unwrap())
        });
    }
    let w = derive_adjacency(&gs, 1e-9).unwrap();
    c.bench_function("icar_structure/144", |bench| bench.iter(|| icar_structure(&w).unwrap()));
}

fn sampling(c: &mut Criterion) {
    let gs = perturbed_grid(5);
    let n = gs.len();
    let y = (0..n).map(|i| Some(((i * 7) % 11 + 15) as f64)).collect();
    let data = ModelData::new(gs.ids().to_vec(), y, Some(vec![20.0; n]), DMatrix::zeros(n, 0), vec![])
        .unwrap();
    let d = distance_matrix(&gs, &DistanceOptions::default()).unwrap();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for effect in [RandomEffect::Hgp(Smoothness::Half), RandomEffect::Bym2] {
        let mut spec = ModelSpec::new(Likelihood::PoissonOffset, effect);
        spec.mcmc.n_chains = 1;
        spec.mcmc.max_iterations = 2000;
        spec.mcmc.ess_target = 1e12;
        let spatial = match effect {
            RandomEffect::Hgp(_) => SpatialInput::Distances(d.clone()),
            _ => SpatialInput::Adjacency(derive_adjacency(&gs, 1e-9).unwrap()),
        };
        group.bench_function(format!("poisson_{}_25x2000", effect.label()), |bench| {
            bench.iter(|| fit(&spec, &data, &spatial).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, factorization, sampling);
criterion_main!(benches);
