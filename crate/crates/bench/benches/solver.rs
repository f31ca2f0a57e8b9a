use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use relaybound_bench::scenario;
use relaybound_core::{build_mdp, policy_iteration, simulate_original, FiniteChannel, HeuristicPolicy, SimulationConfig};

fn quantize(c: &mut Criterion) {
    c.bench_function("quantize_200", |b| b.iter(|| FiniteChannel::equiprobable_exponential(black_box(200))));
}

fn bound(c: &mut Criterion) {
    let relay = scenario(2.0, 10.0, 200);
    let mut group = c.benchmark_group("upper_bound");
    for n_levels in [5, 9] {
        group.bench_function(format!("build_mdp/N_b={n_levels}"), |b| b.iter(|| build_mdp(&relay, n_levels).unwrap()));
        let model = build_mdp(&relay, n_levels).unwrap();
        group.bench_function(format!("policy_iteration/N_b={n_levels}"), |b| {
            b.iter(|| policy_iteration(&model, &model.default_rule()).unwrap().gain)
        });
    }
    group.finish();
}

fn simulate(c: &mut Criterion) {
    let relay = scenario(1.0, 10.0, 200);
    let cfg = SimulationConfig::new(10_000, 1);
    c.bench_function("simulate_heuristic_10k", |b| {
        b.iter(|| simulate_original(&relay, &HeuristicPolicy, &cfg).unwrap().mean)
    });
}

criterion_group!(benches, quantize, bound, simulate);
criterion_main!(benches);
