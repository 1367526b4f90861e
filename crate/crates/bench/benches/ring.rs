use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ssperm_bench::random_reals;
use ssperm_core::protocols::clip::truncate_shared_pair;
use ssperm_core::ring::ring_matmul;
use ssperm_core::FixedPointConfig;
use std::hint::black_box;

fn encode_truncate(c: &mut Criterion) {
    let fp = FixedPointConfig::default();
    let mut g = c.benchmark_group("ring");
    for n in [1_000usize, 100_000] {
        let xs = random_reals(n, 100.0, 1);
        let enc = fp.encode_slice(&xs).unwrap();
        let masks: Vec<_> = fp.encode_slice(&random_reals(n, 1e6, 2)).unwrap();
        let s0: Vec<_> = masks.clone();
        let s1: Vec<_> = enc.iter().zip(&masks).map(|(x, m)| ssperm_core::ring::ring_sub(*x, *m)).collect();
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::new("encode", n), &xs, |b, xs| b.iter(|| fp.encode_slice(black_box(xs)).unwrap()));
        g.bench_with_input(BenchmarkId::new("share_clip_truncate", n), &(s0, s1), |b, (s0, s1)| {
            b.iter(|| truncate_shared_pair(black_box(s0), black_box(s1), fp.frac_bits()))
        });
    }
    let a = fp.encode_slice(&random_reals(64 * 128, 1.0, 3)).unwrap();
    let w = fp.encode_slice(&random_reals(128 * 64, 1.0, 4)).unwrap();
    g.bench_function("matmul_64x128x64", |b| b.iter(|| ring_matmul(black_box(&a), black_box(&w), 64, 128, 64)));
    g.finish();
}

criterion_group!(benches, encode_truncate);
criterion_main!(benches);
