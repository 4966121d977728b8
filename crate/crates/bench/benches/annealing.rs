use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qmaze_bench::{base_qubo, single_read, update_state, ANNEAL_SIZES};
use qmaze_core::Sampler;

fn samplers(c: &mut Criterion) {
    for sampler in [Sampler::Sa, Sampler::Sqa] {
        let mut group = c.benchmark_group(format!("{sampler:?}"));
        group.sample_size(20);
        for n in ANNEAL_SIZES {
            let q = base_qubo(n);
            let params = single_read(1000);
            group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
                b.iter(|| black_box(sampler.sample(&q, &params).unwrap()))
            });
        }
        group.finish();
    }
}

fn update(c: &mut Criterion) {
    let state = update_state(9);
    let base = base_qubo(9);
    c.bench_function("update/9", |b| {
        b.iter(|| black_box(state.update(30.0, 7).unwrap()))
    });
    c.bench_function("with_update/9", |b| {
        b.iter(|| black_box(base.with_update(&state).unwrap()))
    });
}

criterion_group!(benches, samplers, update);
criterion_main!(benches);
