use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qshuffle_core::harness::stream_rng;
use qshuffle_core::mallows::{RankSampler, ShuffleSampler};
use qshuffle_core::{Backend, InversionFreeWord, PvSampler, QParam};

fn mallows(c: &mut Criterion) {
    let q = QParam::from_ratio(9, 10).unwrap();
    let mut group = c.benchmark_group("mallows");
    for n in [16usize, 256, 4096] {
        let ranks = RankSampler::new(n, &q);
        let shuffle = ShuffleSampler::new(n, &q);
        let mut rng = stream_rng(1, 0);
        group.bench_with_input(BenchmarkId::new("ranks", n), &n, |b, _| {
            b.iter(|| black_box(ranks.sample(&mut rng)))
        });
        group.bench_with_input(BenchmarkId::new("shuffle", n), &n, |b, _| {
            b.iter(|| black_box(shuffle.sample_permutation(&mut rng)))
        });
    }
    group.finish();
}

fn pv_prefix(c: &mut Criterion) {
    let q = QParam::from_ratio(1, 2).unwrap();
    let specs = ["1:2,2:3,3:inf", "1:1,2:1;ones"];
    let mut group = c.benchmark_group("pv_prefix");
    for spec in specs {
        let v: InversionFreeWord = spec.parse().unwrap();
        for backend in [Backend::Positional, Backend::Letterwise] {
            let mut s = PvSampler::new(&v, &q, backend);
            let mut rng = stream_rng(2, 0);
            let id = BenchmarkId::new(format!("{backend:?}"), spec);
            group.bench_function(id, |b| b.iter(|| black_box(s.sample(64, &mut rng).unwrap())));
        }
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(30);
    targets = mallows, pv_prefix
}
criterion_main!(benches);
