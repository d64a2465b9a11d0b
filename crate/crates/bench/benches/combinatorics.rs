use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use qshuffle_core::flags::{enumerate_flags, FlagCensus};
use qshuffle_core::mallows::shuffle_distribution;
use qshuffle_core::pvmeasure::{marginal_distribution, theta_law};
use qshuffle_core::pyramid::{dim_by_paths, dim_vertex, martin_kernel};
use qshuffle_core::words::inversions;
use qshuffle_core::{FiniteWord, GaloisField, InversionFreeWord, LatticeVertex, QParam};

fn exact(c: &mut Criterion) {
    let q = QParam::from_ratio(1, 2).unwrap();
    let lambda: LatticeVertex = "3,3,2".parse().unwrap();
    let mu: LatticeVertex = "1,1,1".parse().unwrap();
    c.bench_function("dim_vertex 3,3,2", |b| b.iter(|| dim_vertex(black_box(&lambda), &q)));
    c.bench_function("dim_by_paths 3,3,2", |b| b.iter(|| dim_by_paths(black_box(&lambda), &q)));
    c.bench_function("martin_kernel", |b| b.iter(|| martin_kernel(black_box(&mu), &lambda, &q).unwrap()));
    let v: FiniteWord = "112233".parse().unwrap();
    c.bench_function("shuffle_distribution 112233", |b| {
        b.iter(|| shuffle_distribution(black_box(&v), &q).unwrap())
    });
    let pv: InversionFreeWord = "1:1,2:2,3:inf".parse().unwrap();
    c.bench_function("marginal_distribution n=4", |b| {
        b.iter(|| marginal_distribution(black_box(&pv), 4, &q, 3))
    });
    c.bench_function("theta_law k=3", |b| b.iter(|| theta_law(black_box(3), &q)));
}

fn words(c: &mut Criterion) {
    let w: Vec<u32> = (0..10_000u32).map(|i| i.wrapping_mul(2_654_435_761) % 97).collect();
    c.bench_function("inversions 10k", |b| b.iter(|| inversions(black_box(&w))));
}

fn flags(c: &mut Criterion) {
    let f = GaloisField::new(2).unwrap();
    c.bench_function("enumerate_flags q=2 n=4 d=2", |b| {
        b.iter(|| enumerate_flags(black_box(4), 2, &f).unwrap())
    });
    let lambda: LatticeVertex = "2,1".parse().unwrap();
    c.bench_function("weight_prime_counted 2,1", |b| {
        b.iter(|| FlagCensus::new(f.clone(), 2).weight_prime_counted(black_box(&lambda), 1).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = exact, words, flags
}
criterion_main!(benches);
