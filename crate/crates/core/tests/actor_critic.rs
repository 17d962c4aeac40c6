mod common;

use common::softmax;
use offpac_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two live states, two actions, stochastic transitions.
fn two_state() -> TabularMdp {
    TabularMdp::new_validated(
        2,
        2,
        0.9,
        1.0,
        vec![0.3, 0.7, 0.8, 0.2, 0.5, 0.5, 0.1, 0.9],
        vec![0.2, 1.0, 0.0, 0.6],
        vec![0.4, 0.6],
    )
    .unwrap()
}

fn seeded_agent(mdp: &TabularMdp, seed: u64) -> (AgentState, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = AgentState::new(mdp, 0.0, 0.0, &mut rng).unwrap();
    let theta = [0.7, -1.3, 2.1, 0.4];
    agent.params.theta_mut().copy_from_slice(&theta);
    agent.critic = vec![3.5, -2.0, 12.0, -11.5];
    agent.t = 1234;
    (agent, rng)
}

fn behavior(x: &[f64]) -> Vec<f64> {
    let scaled: Vec<f64> = x.iter().map(|v| 0.1 * v).collect();
    softmax(&scaled).iter().map(|p| 0.1 / 2.0 + 0.9 * p).collect()
}

#[test]
fn kl_step_matches_straight_line_transcription() {
    let mdp = two_state();
    let sched = ScheduleSet::chain_experiment(0.5);
    let bcfg = BehaviorPolicyConfig::default();
    let proj = ProjectionConfig::new(10.0).unwrap();
    for seed in 0..20 {
        let (mut agent, mut rng) = seeded_agent(&mdp, seed);
        let before = agent.clone();
        let rec = alg1_step(&mut agent, &mdp, &bcfg, &sched, &proj, &mut rng).unwrap();

        let (s, a, s2, t) = (rec.s, rec.a, rec.s_next, before.t as f64);
        let alpha = 101.0 / (t + 1e5).powf(0.501);
        let beta = 100.0 / (t + 1e5).powf(0.751);
        let lambda = 0.025 / (t + 1e5).powf(0.5);
        let th = before.params.theta();
        let q = &before.critic;
        let pi_s = softmax(&th[2 * s..2 * s + 2]);
        let pi_next = softmax(&th[2 * s2..2 * s2 + 2]);
        let mu_s = behavior(&th[2 * s..2 * s + 2]);
        let r = mdp.reward(s, a);
        let delta = r + 0.9 * (pi_next[0] * q[2 * s2] + pi_next[1] * q[2 * s2 + 1]) - q[2 * s + a];
        let rho = pi_s[a] / mu_s[a];
        let clipped = q[2 * s + a].clamp(-10.0, 10.0);

        assert!((rec.delta - delta).abs() <= 1e-15);
        assert!((rec.rho - rho).abs() <= 1e-15);
        assert!((agent.critic[2 * s + a] - (q[2 * s + a] + alpha * delta)).abs() <= 1e-15);
        for b in 0..2 {
            let ind = if b == a { 1.0 } else { 0.0 };
            let expected = th[2 * s + b] + beta * (rho * clipped * (ind - pi_s[b]) - lambda * (pi_s[b] - 0.5));
            assert!((agent.params.theta()[2 * s + b] - expected).abs() <= 1e-15, "seed {seed}");
        }
    }
}

#[test]
fn soft_step_without_regularizer_is_expected_gradient() {
    let mdp = two_state();
    let sched = ScheduleSet { lambda_coef: 0.0, ..ScheduleSet::chain_experiment(0.5) };
    let bcfg = BehaviorPolicyConfig::default();
    let proj = ProjectionConfig::new(10.0).unwrap();
    for seed in 0..20 {
        let (mut agent, mut rng) = seeded_agent(&mdp, seed);
        let before = agent.clone();
        let rec = alg2_step(&mut agent, &mdp, &bcfg, &sched, &proj, &mut rng).unwrap();
        let s = rec.s;
        let t = before.t as f64;
        let beta = 100.0 / (t + 1e5).powf(0.751);
        let th = before.params.theta();
        let pi = softmax(&th[2 * s..2 * s + 2]);
        let c: Vec<f64> = (0..2).map(|a| before.critic[2 * s + a].clamp(-10.0, 10.0)).collect();
        for b in 0..2 {
            // sum_a d pi(a) / d theta_b * c(a)
            let direction: f64 = (0..2)
                .map(|a| {
                    let ind = if a == b { 1.0 } else { 0.0 };
                    pi[a] * (ind - pi[b]) * c[a]
                })
                .sum();
            let got = agent.params.theta()[2 * s + b];
            assert!((got - (th[2 * s + b] + beta * direction)).abs() <= 1e-15, "seed {seed}");
        }
    }
}

#[test]
fn soft_step_at_uniform_policy_and_zero_critic_leaves_actor() {
    let mdp = two_state();
    let sched = ScheduleSet::chain_experiment(0.5);
    let bcfg = BehaviorPolicyConfig::default();
    let proj = ProjectionConfig::for_soft(&mdp, sched.lambda_coef);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut agent = AgentState::new(&mdp, 0.0, 0.0, &mut rng).unwrap();
    let rec = alg2_step(&mut agent, &mdp, &bcfg, &sched, &proj, &mut rng).unwrap();
    assert!(agent.params.theta().iter().all(|x| x.abs() <= 1e-18));
    // The critic still moves by the bootstrap bonus lambda ln 2.
    let expected = rec.alpha_t * (mdp.reward(rec.s, rec.a) + 0.9 * rec.lambda_t * 2f64.ln());
    assert!((agent.critic[mdp.pair(rec.s, rec.a)] - expected).abs() < 1e-15);
}

fn changed(a: &[f64], b: &[f64]) -> Vec<usize> {
    a.iter().zip(b).enumerate().filter(|(_, (x, y))| x != y).map(|(i, _)| i).collect()
}

#[test]
fn each_step_touches_one_pair_and_one_row() {
    let mdp = chain_domain(ChainSpec::new(6, 0.99)).unwrap();
    let sched = ScheduleSet::chain_experiment(0.125);
    let bcfg = BehaviorPolicyConfig::default();
    for algorithm in [Algorithm::KlActorCritic, Algorithm::ExpectedSoftActorCritic] {
        let proj = algorithm.projection(&mdp, &sched);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut agent = AgentState::new(&mdp, 0.0, 0.0, &mut rng).unwrap();
        let bound = 2.0 / (1.0 - bcfg.epsilon);
        for _ in 0..20_000 {
            let before = agent.clone();
            let rec = algorithm.step(&mut agent, &mdp, &bcfg, &sched, &proj, &mut rng).unwrap();
            let critic = changed(&before.critic, &agent.critic);
            assert!(critic.is_empty() || critic == vec![mdp.pair(rec.s, rec.a)]);
            let rows: Vec<usize> = changed(before.params.theta(), agent.params.theta()).iter().map(|k| k / 2).collect();
            assert!(rows.iter().all(|&r| r == rec.s));
            assert!(rec.rho <= bound);
        }
    }
}

#[test]
fn critic_stays_bounded() {
    let mdp = chain_domain(ChainSpec::new(6, 0.99)).unwrap();
    let sched = ScheduleSet::chain_experiment(0.5);
    let bcfg = BehaviorPolicyConfig::default();
    let proj = ProjectionConfig::for_kl(&mdp);
    let limit = proj.c_pi + 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut agent = AgentState::new(&mdp, 0.0, 0.0, &mut rng).unwrap();
    for _ in 0..1_000_000 {
        alg1_step(&mut agent, &mdp, &bcfg, &sched, &proj, &mut rng).unwrap();
        assert!(agent.critic.iter().all(|q| q.abs() <= limit));
    }
}

#[test]
fn same_seed_same_stream() {
    let mdp = chain_domain(ChainSpec::new(5, 0.99)).unwrap();
    let sched = ScheduleSet::chain_experiment(0.0625);
    let bcfg = BehaviorPolicyConfig::default();
    for algorithm in [Algorithm::KlActorCritic, Algorithm::ExpectedSoftActorCritic] {
        let proj = algorithm.projection(&mdp, &sched);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let mut agent = AgentState::new(&mdp, 0.0, 0.0, &mut rng).unwrap();
            let records: Vec<StepRecord> = (0..5_000)
                .map(|_| algorithm.step(&mut agent, &mdp, &bcfg, &sched, &proj, &mut rng).unwrap())
                .collect();
            (records, agent)
        };
        let (r1, a1) = run();
        let (r2, a2) = run();
        assert_eq!(r1, r2);
        assert_eq!(a1, a2);
    }
}
