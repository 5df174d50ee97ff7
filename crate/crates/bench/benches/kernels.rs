use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use nls_bench::gaussian;
use nls_core::evolution::nls_step;
use nls_core::grid::{from_frequency, to_frequency};
use nls_core::littlewood_paley::besov_norm;

fn transform(c: &mut Criterion) {
    let mut group = c.benchmark_group("transform");
    for n in [1024, 4096, 16384] {
        let u = gaussian(n);
        group.bench_with_input(BenchmarkId::new("round_trip", n), &u, |b, u| {
            b.iter(|| from_frequency(&to_frequency(black_box(u))))
        });
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("nls_step");
    for n in [1024, 4096, 16384] {
        let u = gaussian(n);
        group.bench_with_input(BenchmarkId::new("cubic", n), &u, |b, u| b.iter(|| nls_step(black_box(u), 1e-4, 3.0)));
        group.bench_with_input(BenchmarkId::new("p2.5", n), &u, |b, u| b.iter(|| nls_step(black_box(u), 1e-4, 2.5)));
    }
    group.finish();
}

fn besov(c: &mut Criterion) {
    let mut group = c.benchmark_group("besov_norm");
    group.sample_size(20);
    for n in [4096, 16384] {
        let u = gaussian(n);
        group.bench_with_input(BenchmarkId::new("critical_cubic", n), &u, |b, u| {
            b.iter(|| besov_norm(black_box(u), 2.0))
        });
    }
    group.finish();
}

criterion_group!(benches, transform, step, besov);
criterion_main!(benches);
