use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tfqkd_core::channel::{decoy_yield, IntensitySchedule};
use tfqkd_core::decoy::{build_lp, yield_bounds, CombinationReading};
use tfqkd_core::keyrate::{analyze, simulated_scenario, PipelineOptions};
use tfqkd_core::leakage::{analytic_backend, BivariateEntropyForm, ParitySectorProvider};
use tfqkd_core::phasesim::{simulate, SessionSetup};
use tfqkd_core::{ChannelParams, PhotonIntensity};

fn schedule() -> IntensitySchedule {
    IntensitySchedule::new(0.016, 0.005, 0.002, 5e-5).unwrap()
}

fn channel(c: &mut Criterion) {
    let params = ChannelParams::at_distance(300.0);
    let (x, y) = (PhotonIntensity::new(0.016).unwrap(), PhotonIntensity::new(5e-5).unwrap());
    c.bench_function("decoy_yield", |b| {
        b.iter(|| decoy_yield(black_box(&params), black_box(x), black_box(y)))
    });
}

fn decoy_bounds(c: &mut Criterion) {
    let params = ChannelParams::at_distance(300.0);
    let scenario = simulated_scenario(&params, &schedule()).unwrap();
    let lp = build_lp(&scenario.yields, &schedule(), 10).unwrap();
    c.bench_function("yield_bounds", |b| {
        b.iter(|| yield_bounds(black_box(&lp), CombinationReading::Corrected).unwrap())
    });
}

fn key_rate(c: &mut Criterion) {
    let params = ChannelParams::at_distance(300.0);
    let scenario = simulated_scenario(&params, &schedule()).unwrap();
    let backend = analytic_backend(ParitySectorProvider, BivariateEntropyForm::grouped_binary());
    let opts = PipelineOptions::default();
    c.bench_function("analyze_analytic", |b| {
        b.iter(|| analyze(black_box(&scenario), &backend, &opts).unwrap())
    });
}

fn phase_session(c: &mut Criterion) {
    let setup = SessionSetup::field_300km();
    let mut group = c.benchmark_group("phasesim");
    group.sample_size(10);
    group.bench_function("one_second", |b| b.iter(|| simulate(&setup, 1.0, black_box(1)).unwrap()));
    group.finish();
}

criterion_group!(benches, channel, decoy_bounds, key_rate, phase_session);
criterion_main!(benches);
