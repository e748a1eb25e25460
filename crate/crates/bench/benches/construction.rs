use criterion::{criterion_group, criterion_main, Criterion};
use quasispec_core::{build_fepsn, build_partition, itinerary_symbols, FlowParams, SamplingFunction};

fn flow() -> FlowParams {
    FlowParams::new(vec![1.0, 2f64.sqrt()], vec![0.1, 0.2]).unwrap()
}

fn construction(c: &mut Criterion) {
    let f = SamplingFunction::cosine_sum(2);
    let mut group = c.benchmark_group("construction");
    group.sample_size(10);
    group.bench_function("build_partition eps=0.8", |b| {
        b.iter(|| build_partition(&f, &flow(), 0.8, 4).unwrap())
    });
    let part = build_partition(&f, &flow(), 0.8, 4).unwrap();
    let fe = build_fepsn(&f, &part, 0.8, 4).unwrap();
    group.bench_function("itinerary 10^4", |b| b.iter(|| itinerary_symbols(&fe, &flow(), 10_000).unwrap()));
    let seq = itinerary_symbols(&fe, &flow(), 10_000).unwrap().sequence;
    let ell = 3.0 * part.ell_d();
    group.bench_function("simple fdp 10^4", |b| b.iter(|| seq.check_simple_fdp(ell, seq.len()).unwrap()));
    group.finish();
}

criterion_group!(benches, construction);
criterion_main!(benches);
