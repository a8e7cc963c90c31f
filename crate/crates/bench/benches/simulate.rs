use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nts_bench::{bsc, uniform};
use nts_core::simulate::build_codebook;
use nts_core::{natural_decode, nts_run, SimConfig};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simulate(c: &mut Criterion) {
    let q = uniform(2);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let codebook = build_codebook(&q, 24, 0.4, &mut rng).unwrap();
    let y: Vec<u8> = (0..24).map(|i| (i % 3 == 0) as u8).collect();
    c.bench_function("decode/natural_n24", |b| {
        b.iter(|| natural_decode(&codebook, black_box(&y), &q, 0.1))
    });

    let mut g = c.benchmark_group("nts");
    g.sample_size(10);
    let mut cfg = SimConfig::new(16, 0.3, 0.1, q.clone(), bsc(0.1));
    cfg.blocks = 200;
    g.bench_function("explicit_n16_200_blocks", |b| b.iter(|| nts_run(&cfg).unwrap()));
    let mut big = SimConfig::new(200, 0.3, 0.1, q, bsc(0.1));
    big.blocks = 50;
    g.bench_function("ensemble_n200_50_blocks", |b| b.iter(|| nts_run(&big).unwrap()));
    g.finish();
}

criterion_group!(benches, simulate);
criterion_main!(benches);
