use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use offpac_bench::{chain, trained_agent};
use offpac_core::harness::{simulate, Execution, RunConfig};
use offpac_core::oracle::{contraction_certificate, exact_objective_and_gradients, exact_q, Regularizer};
use offpac_core::{Algorithm, BehaviorPolicyConfig, ScheduleSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn steps(c: &mut Criterion) {
    let mdp = chain(6);
    let sched = ScheduleSet::chain_experiment(0.5);
    let bcfg = BehaviorPolicyConfig::default();
    for algorithm in [Algorithm::KlActorCritic, Algorithm::ExpectedSoftActorCritic] {
        let proj = algorithm.projection(&mdp, &sched);
        let (agent, rng) = trained_agent(&mdp, algorithm, 10_000);
        c.bench_function(&format!("{}_1000_steps", algorithm.name()), |b| {
            b.iter_batched(
                || (agent.clone(), rng.clone()),
                |(mut agent, mut rng)| {
                    for _ in 0..1000 {
                        algorithm.step(&mut agent, &mdp, &bcfg, &sched, &proj, &mut rng).unwrap();
                    }
                    agent
                },
                BatchSize::SmallInput,
            )
        });
    }
}

fn oracles(c: &mut Criterion) {
    let mdp = chain(6);
    let (agent, _) = trained_agent(&mdp, Algorithm::KlActorCritic, 50_000);
    let bcfg = BehaviorPolicyConfig::default();
    let start = vec![1.0 / 7.0; 7];
    c.bench_function("exact_q_chain6", |b| b.iter(|| exact_q(&mdp, black_box(&agent.params.target_policy())).unwrap()));
    c.bench_function("gradients_chain6", |b| {
        b.iter(|| exact_objective_and_gradients(&mdp, black_box(&agent.params), 1e-3, Regularizer::Entropy, &start).unwrap())
    });
    c.bench_function("certificate_chain6", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            contraction_certificate(&mdp, black_box(&agent.params), &bcfg, 20, &mut rng).unwrap()
        })
    });
}

fn experiment(c: &mut Criterion) {
    let cfg = RunConfig { total_steps: 100_000, seeds: vec![0], ..RunConfig::default() };
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    group.bench_function("alg1_chain6_1e5_steps", |b| b.iter(|| simulate(black_box(&cfg), Execution::Serial).unwrap()));
    group.finish();
}

criterion_group!(benches, steps, oracles, experiment);
criterion_main!(benches);
