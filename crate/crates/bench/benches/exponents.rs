use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nts_bench::{bsc, random_channel, uniform};
use nts_core::{capacity, correct_exponent_ml, correct_exponent_strict, e0, error_exponent, fixed_rate_run};

fn exponents(c: &mut Criterion) {
    let p = random_channel(4, 6, 7);
    let q = uniform(4);
    c.bench_function("e0/4x6", |b| b.iter(|| e0(black_box(0.5), &q, &p).unwrap()));
    c.bench_function("error_exponent/4x6", |b| {
        b.iter(|| error_exponent(black_box(0.1), &q, &p).unwrap())
    });
    c.bench_function("correct_ml/4x6", |b| {
        b.iter(|| correct_exponent_ml(black_box(0.8), &q, &p).unwrap())
    });
    c.bench_function("correct_strict/4x6", |b| {
        b.iter(|| correct_exponent_strict(black_box(0.8), &q, &p).unwrap())
    });
    c.bench_function("capacity/4x6", |b| b.iter(|| capacity(&p, &[0, 1, 2, 3]).unwrap()));
    let z = bsc(0.1);
    let q0 = nts_core::Distribution::new(vec![0.9, 0.1]).unwrap();
    c.bench_function("fixed_rate_run/bsc", |b| {
        b.iter(|| fixed_rate_run(&q0, black_box(0.3), &z, 1e-9, 10_000).unwrap())
    });
}

criterion_group!(benches, exponents);
criterion_main!(benches);
