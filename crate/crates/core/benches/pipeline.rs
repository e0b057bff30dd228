//! Benchmarks for the data-parallel core: window generation plus detector
//! reduction through the rayon path (`run_experiment`) and the sequential
//! reference path (`run_experiment_seq`), and the analytic evaluators.
//!
//! Run with `cargo bench -p qtms-core`; build with
//! `--no-default-features` to measure the sequential-only configuration.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use qtms_core::analytic::{analytic_pdet, invert_pfa, AnalyticModel};
use qtms_core::detectors::{run_experiment, run_experiment_seq, DetectorId};
use qtms_core::sampler::WindowSpec;
use qtms_core::signal_model::{tmsv_covariance, TmsvParams};

fn bench_experiment(c: &mut Criterion) {
    let cov = tmsv_covariance(&TmsvParams::ideal(0.3, 0.2)).unwrap();
    let mut group = c.benchmark_group("detector_experiment");
    for &(window_len, num_windows) in &[(1_000usize, 64usize), (10_000, 64)] {
        let spec = WindowSpec::new(window_len, num_windows, 42);
        let samples = (window_len * num_windows * 2) as u64;
        group.throughput(Throughput::Elements(samples));
        group.bench_with_input(
            BenchmarkId::new("parallel", format!("{window_len}x{num_windows}")),
            &spec,
            |b, spec| {
                b.iter(|| run_experiment(black_box(&cov), &cov, *spec, DetectorId::D1).unwrap())
            },
        );
        group.bench_with_input(
            BenchmarkId::new("sequential", format!("{window_len}x{num_windows}")),
            &spec,
            |b, spec| {
                b.iter(|| {
                    run_experiment_seq(black_box(&cov), &cov, *spec, DetectorId::D1).unwrap()
                })
            },
        );
    }
    group.finish();
}

fn bench_analytic(c: &mut Criterion) {
    let mut group = c.benchmark_group("analytic");
    for &n in &[1e3, 1e5] {
        let t = invert_pfa(n, 1e-3).unwrap();
        group.bench_with_input(BenchmarkId::new("pdet", n as u64), &n, |b, &n| {
            let model = AnalyticModel::new(n, 0.01);
            b.iter(|| analytic_pdet(black_box(&model), t, 1e-12).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("invert_pfa", n as u64), &n, |b, &n| {
            b.iter(|| invert_pfa(black_box(n), 1e-3).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_experiment, bench_analytic);
criterion_main!(benches);
