//! Fixtures shared by the benchmarks.

use offpac_core::{chain_domain, AgentState, Algorithm, BehaviorPolicyConfig, ChainSpec, ScheduleSet, TabularMdp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn chain(n: usize) -> TabularMdp {
    chain_domain(ChainSpec::new(n, 0.99)).expect("valid chain")
}

/// Agent after `steps` training steps, with its rng.
pub fn trained_agent(mdp: &TabularMdp, algorithm: Algorithm, steps: u64) -> (AgentState, ChaCha8Rng) {
    let sched = ScheduleSet::chain_experiment(0.5);
    let bcfg = BehaviorPolicyConfig::default();
    let proj = algorithm.projection(mdp, &sched);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut agent = AgentState::new(mdp, 0.0, 0.0, &mut rng).expect("agent");
    for _ in 0..steps {
        algorithm.step(&mut agent, mdp, &bcfg, &sched, &proj, &mut rng).expect("step");
    }
    (agent, rng)
}
