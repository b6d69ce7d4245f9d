//! Subset enumeration and simulation in sequential and parallel mode.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use markov_hitting::generators::{lazy_rw_graph, random_graph};
use markov_hitting::spectral::{self, Grid};
use markov_hitting::{hitting, montecarlo, Config, Exec, SubsetMask};

const MODES: [Exec; 2] = [Exec::Sequential, Exec::Parallel];

fn name(exec: Exec) -> &'static str {
    match exec {
        Exec::Sequential => "sequential",
        Exec::Parallel => "parallel",
    }
}

fn enumeration(c: &mut Criterion) {
    let chain = lazy_rw_graph(&random_graph(14, 0.3, 7), 0.5).unwrap();
    let mut group = c.benchmark_group("t_h_pi_n14");
    group.sample_size(10);
    for exec in MODES {
        let cfg = Config::default().with_exec(exec);
        group.bench_with_input(BenchmarkId::from_parameter(name(exec)), &cfg, |b, cfg| {
            b.iter(|| hitting::t_h_pi(black_box(&chain), cfg).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("spectral_profile_n14");
    group.sample_size(10);
    for exec in MODES {
        let cfg = Config::default().with_exec(exec);
        group.bench_with_input(BenchmarkId::from_parameter(name(exec)), &cfg, |b, cfg| {
            b.iter(|| spectral::spectral_profile(black_box(&chain), &Grid::Points(vec![0.5]), cfg).unwrap())
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let chain = lazy_rw_graph(&random_graph(12, 0.3, 3), 0.5).unwrap();
    let target = SubsetMask::singleton(&chain, 11);
    let mut start = vec![0.0; 12];
    start[0] = 1.0;
    let cap = montecarlo::default_cap(&chain, None);
    let mut group = c.benchmark_group("simulate_hitting_1e5");
    group.sample_size(10);
    for exec in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name(exec)), &exec, |b, &exec| {
            b.iter(|| montecarlo::simulate_hitting(&chain, &start, &target, 100_000, 1, cap, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, enumeration, simulation);
criterion_main!(benches);
