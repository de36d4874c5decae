use std::hint::black_box;

use cfmimo_bench::{design_fixture, detection_fixture};
use cfmimo_core::detection::{ep_detect, gabp_detect, lmmse_detect, EpConfig, GabpConfig};
use cfmimo_core::manifold::{euclidean_gradient, optimize_pilots, OptimizerConfig};
use cfmimo_core::seed::trial_rng;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn detectors(c: &mut Criterion) {
    let mut g = c.benchmark_group("detect");
    for n in [20usize, 40, 80] {
        let f = detection_fixture(n, n, 3);
        g.bench_with_input(BenchmarkId::new("lmmse", n), &f, |b, f| {
            b.iter(|| lmmse_detect(&f.channel, black_box(&f.y), &f.constellation).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("ep", n), &f, |b, f| {
            b.iter(|| ep_detect(&f.channel, black_box(&f.y), &f.constellation, &EpConfig::default()).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("gabp", n), &f, |b, f| {
            b.iter(|| gabp_detect(&f.channel, black_box(&f.y), &f.constellation, &GabpConfig::default()).unwrap())
        });
    }
    g.finish();
}

fn pilot_design(c: &mut Criterion) {
    let f = design_fixture(40, 20, 10, 5);
    c.bench_function("euclidean_gradient/40x20x10", |b| {
        b.iter(|| euclidean_gradient(black_box(f.point.matrix()), &f.beta, f.snr).unwrap())
    });
    let mut g = c.benchmark_group("optimize");
    g.sample_size(10);
    g.bench_function("optimize_pilots/40x20x10", |b| {
        b.iter(|| {
            let cfg = OptimizerConfig::default();
            optimize_pilots(&f.beta, f.tau, f.snr, &cfg, Some(f.point.clone()), &mut trial_rng(5, 2)).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, detectors, pilot_design);
criterion_main!(benches);
