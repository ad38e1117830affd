use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lcrip_bench::fixture;
use lcrip_core::metrics::{delta_m_exact, gamma_km_exact, gamma_km_heuristic};
use lcrip_core::recovery::{basis_pursuit, random_sparse_signal, DEFAULT_TOL};
use lcrip_core::{sample_matrix, DistributionSpec, Kind, RandomStream};

fn gamma(c: &mut Criterion) {
    let mut g = c.benchmark_group("gamma_km");
    let a = fixture(Kind::Gaussian, 8, 16, 1);
    for (k, m) in [(1, 2), (2, 2), (2, 4)] {
        g.bench_with_input(BenchmarkId::new("exact", format!("k{k}_m{m}")), &(k, m), |b, &(k, m)| {
            b.iter(|| gamma_km_exact(black_box(&a), k, m).unwrap())
        });
    }
    let big = fixture(Kind::LaplaceProduct, 64, 256, 2);
    g.bench_function("heuristic_64x256_k8_m8", |b| {
        b.iter(|| gamma_km_heuristic(black_box(&big), 8, 8, 20, &RandomStream::new(3)).unwrap())
    });
    g.finish();
}

fn delta(c: &mut Criterion) {
    let mut g = c.benchmark_group("delta_m_exact");
    for big_n in [64, 256] {
        let a = fixture(Kind::Gaussian, big_n / 4, big_n, 4);
        g.bench_with_input(BenchmarkId::new("m2", big_n), &a, |b, a| b.iter(|| delta_m_exact(black_box(a), 2).unwrap()));
    }
    let a = fixture(Kind::Gaussian, 16, 32, 5);
    g.bench_function("m3_N32", |b| b.iter(|| delta_m_exact(black_box(&a), 3).unwrap()));
    g.finish();
}

fn recovery(c: &mut Criterion) {
    let mut g = c.benchmark_group("basis_pursuit");
    g.sample_size(20);
    for (n, big_n, m) in [(20, 50, 2), (64, 256, 10)] {
        let a = fixture(Kind::Gaussian, n, big_n, 6);
        let (_, _, x) = random_sparse_signal(big_n, m, &RandomStream::new(7));
        let rhs = a.mul_vec(&x);
        g.bench_function(format!("{n}x{big_n}_m{m}"), |b| b.iter(|| basis_pursuit(black_box(&a), &rhs, DEFAULT_TOL).unwrap()));
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_matrix");
    for kind in [Kind::Gaussian, Kind::LaplaceProduct, Kind::UniformBall, Kind::UniformL1Ball] {
        let spec = DistributionSpec::new(kind, 256);
        g.bench_function(kind.name(), |b| b.iter(|| sample_matrix(&spec, 64, &RandomStream::new(8)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, gamma, delta, recovery, sampling);
criterion_main!(benches);
