use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use quasispec_core::{
    lyapunov_growth, m_plus, propagate, trace_potential, FlowParams, MParams, SamplingFunction, TorusPoint,
};
use std::hint::black_box;

fn flow() -> FlowParams {
    FlowParams::new(vec![1.0, 2f64.sqrt()], vec![0.0, 0.0]).unwrap()
}

fn transfer_matrix(c: &mut Criterion) {
    let f = SamplingFunction::cosine_sum(2);
    let mut group = c.benchmark_group("propagate");
    for &len in &[100.0, 1000.0] {
        let trace = trace_potential(&f, &flow(), len, 0.005).unwrap();
        group.bench_with_input(BenchmarkId::new("real", len), &trace, |b, t| {
            b.iter(|| propagate(black_box(t), Complex64::new(0.5, 0.0)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("complex", len), &trace, |b, t| {
            b.iter(|| propagate(black_box(t), Complex64::new(0.5, 0.1)).unwrap())
        });
    }
    group.finish();
}

fn estimators(c: &mut Criterion) {
    let f = SamplingFunction::cosine_sum(2);
    let omegas = vec![TorusPoint::origin(2)];
    c.bench_function("lyapunov_growth X=400", |b| {
        b.iter(|| lyapunov_growth(&f, &flow(), Complex64::new(2.0, 1.0), 400.0, 0.005, &omegas).unwrap())
    });
    let params = MParams {
        horizon: Some(100.0),
        ..MParams::default()
    };
    c.bench_function("m_plus X=100", |b| {
        b.iter(|| m_plus(&f, &flow(), Complex64::new(2.0, 1.0), &params).unwrap())
    });
}

criterion_group!(benches, transfer_matrix, estimators);
criterion_main!(benches);
