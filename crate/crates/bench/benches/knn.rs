use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tissuesim::knn;
use tissuesim_bench::scattered_points;

fn neighbours(c: &mut Criterion) {
    let mut group = c.benchmark_group("knn_k8");
    for n in [1_000, 10_000] {
        let pts = scattered_points(n, 1);
        group.bench_function(format!("{n}_points"), |b| b.iter(|| black_box(knn(&pts, 8).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, neighbours);
criterion_main!(benches);
