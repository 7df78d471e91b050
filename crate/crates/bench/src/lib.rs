use std::hint::black_box;

use cpsto_core::channel::apply_sto;
use cpsto_core::harness::{run_monte_carlo, run_trial, ChannelMode, Scenario};
use cpsto_core::spectral::dft;
use cpsto_core::sync::{estimate_sto, EstimatorConfig, Method};
use cpsto_core::txgen::{build_frame, OfdmParams};
use criterion::{BenchmarkId, Criterion, Throughput};
use num_complex::Complex64;

fn ramp(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
        .collect()
}

fn transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("dft");
    // 120 takes the direct path, the rest the radix-2 path
    for n in [64, 120, 128, 1024, 4096] {
        let x = ramp(n);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| dft(black_box(x), n).unwrap())
        });
    }
    group.finish();
}

fn estimators(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate_sto");
    for cp in [16, 32] {
        let params = OfdmParams::default().with_cp_len(cp);
        let stream = apply_sto(build_frame(&params, 7).unwrap(), 3).unwrap();
        for method in Method::ALL {
            let cfg = EstimatorConfig::for_stream(method, &params, &stream);
            group.bench_function(BenchmarkId::new(method.name(), cp), |b| {
                b.iter(|| estimate_sto(black_box(&stream), &cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_trial");
    for channel in [
        ChannelMode::Awgn,
        ChannelMode::RayleighFixture,
        ChannelMode::RayleighRandom,
    ] {
        let scenario = Scenario::new(OfdmParams::default(), 10.0, channel);
        let mut seed = 0u64;
        group.bench_function(channel.name(), |b| {
            b.iter(|| {
                seed += 1;
                run_trial(&scenario, 3, seed).unwrap()
            })
        });
    }
    group.finish();

    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    let scenario = Scenario::new(OfdmParams::default(), 10.0, ChannelMode::Awgn);
    group.bench_function("awgn_1000", |b| {
        b.iter(|| run_monte_carlo(&scenario, 1000, 1).unwrap())
    });
    group.finish();
}

pub fn benchmarks(c: &mut Criterion) {
    transforms(c);
    estimators(c);
    trials(c);
}
