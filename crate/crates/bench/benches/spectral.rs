use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wittenlab_bench::{circle, torus};
use wittenlab::model_oscillator::{mehler_closed, mehler_series};
use wittenlab::{assemble_witten_laplacian, deformed_coboundary, eigendecompose, heat_trace};

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble");
    for n in [128, 512] {
        let (complex, field) = circle(n);
        group.bench_with_input(BenchmarkId::new("circle", n), &n, |b, _| {
            b.iter(|| assemble_witten_laplacian(&complex, &field, 64.0, 0).unwrap())
        });
    }
    let (complex, field) = torus(16);
    group.bench_function("torus_16_coboundary", |b| b.iter(|| deformed_coboundary(&complex, &field, 64.0, 1).unwrap()));
    group.finish();
}

fn eigensolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigendecompose");
    group.sample_size(10);
    for n in [128, 256, 512] {
        let (complex, field) = circle(n);
        let op = assemble_witten_laplacian(&complex, &field, 16.0, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("circle", n), &n, |b, _| b.iter(|| eigendecompose(&op).unwrap()));
    }
    group.finish();
}

fn heat(c: &mut Criterion) {
    let (complex, field) = circle(512);
    let dec = eigendecompose(&assemble_witten_laplacian(&complex, &field, 64.0, 0).unwrap()).unwrap();
    c.bench_function("heat_trace_circle_512", |b| b.iter(|| heat_trace(&dec, 8.0 / 64.0).unwrap()));
    c.bench_function("heat_kernel_entry_circle_512", |b| {
        let heat = dec.heat(1.0 / 64.0).unwrap();
        b.iter(|| heat.entry(128, 130))
    });
}

fn mehler(c: &mut Criterion) {
    c.bench_function("mehler_closed", |b| b.iter(|| mehler_closed(0.6, 0.7, -1.2).unwrap()));
    c.bench_function("mehler_series_80", |b| b.iter(|| mehler_series(0.6, 0.7, -1.2, 80).unwrap()));
}

criterion_group!(benches, assembly, eigensolve, heat, mehler);
criterion_main!(benches);
