use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use dcpf::harness::{run_monte_carlo, McConfig, Topology};
use dcpf::{evaluate, solve_energy, solve_monotone, solve_zbus, SolveOptions};
use dcpf_bench::{fixture, meshed_suite};

fn fixed_point(c: &mut Criterion) {
    let mut group = c.benchmark_group("fixed_point");
    let opts = SolveOptions::default();
    for f in meshed_suite() {
        group.bench_with_input(BenchmarkId::new("zbus", &f.label), &f, |b, f| {
            b.iter(|| solve_zbus(&f.model, &f.net.band, f.net.norm_q, &opts, None).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("monotone", &f.label), &f, |b, f| {
            b.iter(|| solve_monotone(&f.model, &f.net.band, &opts))
        });
    }
    group.finish();
}

fn energy(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy");
    group.sample_size(10);
    for f in [fixture(Topology::Meshed, 10, 3), fixture(Topology::Radial, 10, 3)] {
        group.bench_function(&f.label, |b| {
            b.iter(|| solve_energy(&f.model, &SolveOptions::energy(), None).unwrap())
        });
    }
    group.finish();
}

fn setup(c: &mut Criterion) {
    let mut group = c.benchmark_group("setup");
    for f in meshed_suite() {
        group.bench_with_input(BenchmarkId::new("derive", &f.label), &f, |b, f| {
            b.iter(|| f.net.derive().unwrap())
        });
        group.bench_with_input(BenchmarkId::new("conditions", &f.label), &f, |b, f| {
            b.iter(|| evaluate(&f.model, &f.net.band, f.net.norm_q))
        });
    }
    group.finish();
}

fn montecarlo(c: &mut Criterion) {
    let f = fixture(Topology::Radial, 10, 0);
    let cfg = McConfig {
        trials: 100,
        p_scale_range: (0.0, 2.0),
        iz_scale_range: (0.0, 2.0),
        ..McConfig::default()
    };
    let mut group = c.benchmark_group("montecarlo");
    group.sample_size(10);
    group.bench_function("radial-10x100", |b| b.iter(|| run_monte_carlo(black_box(&f.net), &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, fixed_point, energy, setup, montecarlo);
criterion_main!(benches);
