use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use meshembed::optim::{edge_loss_grad, initial_embeddings, perm_loss_grad, FitTarget, Lambda};
use meshembed::{
    extract, fit, greedy_single_cycle, shapes, sinkhorn, solve_lap, DistanceMode, ExtractConfig, FitConfig,
    ReductionMode, SinkhornConfig,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(d, d, |_, _| rng.random_range(-5.0..5.0))
}

fn bench_sinkhorn(c: &mut Criterion) {
    let mut group = c.benchmark_group("sinkhorn");
    let config = SinkhornConfig { max_iters: 50, tol: 0.0 };
    for d in [6, 12, 24] {
        let logits = random_matrix(d, d as u64);
        group.bench_with_input(BenchmarkId::from_parameter(d), &logits, |b, m| {
            b.iter(|| sinkhorn(black_box(m), &config).unwrap())
        });
    }
    group.finish();
}

fn bench_assignment(c: &mut Criterion) {
    let mut group = c.benchmark_group("assignment");
    for d in [6, 12, 24] {
        let cost = random_matrix(d, 100 + d as u64);
        group.bench_with_input(BenchmarkId::new("lap", d), &cost, |b, m| b.iter(|| solve_lap(black_box(m)).unwrap()));
        group.bench_with_input(BenchmarkId::new("greedy_cycle", d), &cost, |b, m| {
            b.iter(|| greedy_single_cycle(black_box(m)))
        });
    }
    group.finish();
}

fn bench_losses(c: &mut Criterion) {
    let mut group = c.benchmark_group("losses");
    group.sample_size(20);
    for (name, mesh) in [("ico", shapes::icosahedron()), ("sphere486", shapes::octasphere(11))] {
        let target = FitTarget::from_mesh(&mesh).unwrap();
        let config = FitConfig::default();
        let emb = initial_embeddings(mesh.vertex_count(), &config);
        let lambda = Lambda::Auto.resolve(target.vertex_count, target.edges.len());
        group.bench_function(BenchmarkId::new("edge", name), |b| {
            b.iter(|| edge_loss_grad(black_box(&emb), &target.edges, lambda, DistanceMode::Spacetime))
        });
        group.bench_function(BenchmarkId::new("perm", name), |b| {
            b.iter(|| perm_loss_grad(black_box(&emb), &target.sigma, ReductionMode::ProdSum, &config.sinkhorn).unwrap())
        });
    }
    group.finish();
}

fn bench_extract(c: &mut Criterion) {
    let mut group = c.benchmark_group("extract");
    group.sample_size(20);
    let mesh = shapes::octasphere(11);
    let emb = fit(&mesh, &FitConfig::default()).unwrap().embeddings;
    group.bench_function("sphere486_fitted", |b| {
        b.iter(|| extract(black_box(&emb), &mesh.positions, &ExtractConfig::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_sinkhorn, bench_assignment, bench_losses, bench_extract);
criterion_main!(benches);
