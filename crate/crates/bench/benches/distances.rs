use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ust_bench::random_model;
use ust_core::{distance_matrix, w2_squared, Metric};

fn pairwise(c: &mut Criterion) {
    let mut group = c.benchmark_group("w2_squared");
    for dim in [8, 32, 112, 256] {
        let a = random_model("a", dim, dim, 1);
        let b = random_model("b", dim, dim / 2, 2);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |bench, _| {
            bench.iter(|| w2_squared(black_box(&a), black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("distance_matrix");
    group.sample_size(20);
    for n in [4, 12, 24] {
        let models: Vec<_> = (0..n)
            .map(|i| random_model(&format!("m{i:02}"), 112, 112, i as u64))
            .collect();
        group.bench_with_input(BenchmarkId::new("w2", n), &n, |bench, _| {
            bench.iter(|| distance_matrix(black_box(&models), Metric::W2).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pairwise, matrix);
criterion_main!(benches);
