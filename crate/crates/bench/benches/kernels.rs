use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smc_forget::coupling::{coupled_step_individual, coupled_step_state, CoupledFilterPair};
use smc_forget::exact::{evolve_counts, exact_poc_tv_grid, default_q_grid, CountChainDistribution};
use smc_forget::rng::stream_from_seed;
use smc_forget::smc::{initialise, pf_step, ParticleSystem};
use smc_forget::binary_model;

fn particle_filter(c: &mut Criterion) {
    let model = binary_model(0.1, 0.1, 1.0, 2).unwrap();
    let mut group = c.benchmark_group("pf_step");
    for n in [64usize, 1024, 16384] {
        let mut rng = stream_from_seed(1);
        let sys = initialise(&model, n, &mut rng).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &sys, |b, sys| {
            b.iter(|| pf_step(black_box(sys), &model, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn coupled_steps(c: &mut Criterion) {
    let model = binary_model(0.1, 1.0, 1.0, 2).unwrap();
    let mut group = c.benchmark_group("coupled_step");
    for n in [64usize, 1024] {
        let pair = CoupledFilterPair::new(
            ParticleSystem::new(vec![0; n], 0).unwrap(),
            ParticleSystem::new(vec![1; n], 0).unwrap(),
        )
        .unwrap();
        let mut rng = stream_from_seed(2);
        group.bench_with_input(BenchmarkId::new("state", n), &pair, |b, pair| {
            b.iter(|| coupled_step_state(black_box(pair), &model, &mut rng).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("individual", n), &pair, |b, pair| {
            b.iter(|| coupled_step_individual(black_box(pair), &model, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn count_chain(c: &mut Criterion) {
    let model = binary_model(0.1, 0.1, 1.0, 2).unwrap();
    let mut group = c.benchmark_group("evolve_counts");
    group.sample_size(20);
    for n in [256usize, 4096] {
        let dist = CountChainDistribution::initial(&model, n).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &dist, |b, d| {
            b.iter(|| evolve_counts(black_box(d), &model).unwrap())
        });
    }
    group.finish();

    let model = binary_model(0.1, 0.1, 1.0, 4).unwrap();
    c.bench_function("exact_poc_tv_grid/N=1024,k=4", |b| {
        let qs = default_q_grid(1024);
        b.iter(|| exact_poc_tv_grid(&model, 1024, black_box(&qs), 4).unwrap())
    });
}

criterion_group!(benches, particle_filter, coupled_steps, count_chain);
criterion_main!(benches);
