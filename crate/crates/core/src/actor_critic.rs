//! Off-policy actor-critic with decaying KL regularization and expected soft
//! actor-critic, one environment step at a time.
//!
//! Both algorithms share the step skeleton:
//!
//! 1. `A_t ~ mu_theta(.|S_t)`, then `(R_{t+1}, S_{t+1})` from the MDP.
//! 2. `delta_t` from the pre-update critic, bootstrapping with the target
//!    policy (plus the entropy bonus `-lambda_t log pi` for the soft variant).
//! 3. Only `q(S_t, A_t)` moves, by `alpha_t delta_t`.
//! 4. The actor reads the critic values cached before step 3, clipped to
//!    `[-C, C]`, and only row `S_t` of `theta` changes.
//! 5. Reaching an absorbing state resets to `p0`; `t` keeps counting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{sample_index, TabularMdp};
use crate::oracle::{exact_q, objective};
use crate::policy::{log_softmax_into, softmax_into, BehaviorPolicyConfig, PolicyParams};
use crate::sa::{ExpectedSarsa, Transition};
use crate::schedule::ScheduleSet;

/// Any `|theta|` beyond this aborts the run.
pub const THETA_LIMIT: f64 = 1e8;

/// Bound on reset attempts when `p0` puts mass on absorbing states.
const MAX_RESET_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Importance-weighted actor update with decaying `KL(uniform || pi)`
    /// regularization.
    #[serde(rename = "alg1")]
    KlActorCritic,
    /// Expected-over-actions actor update with an entropy-regularized critic.
    #[serde(rename = "alg2")]
    ExpectedSoftActorCritic,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KlActorCritic => "alg1",
            Algorithm::ExpectedSoftActorCritic => "alg2",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "alg1" => Some(Algorithm::KlActorCritic),
            "alg2" => Some(Algorithm::ExpectedSoftActorCritic),
            _ => None,
        }
    }

    /// The clipping bound this algorithm uses on `mdp` under `sched`.
    pub fn projection(self, mdp: &TabularMdp, sched: &ScheduleSet) -> ProjectionConfig {
        match self {
            Algorithm::KlActorCritic => ProjectionConfig::for_kl(mdp),
            Algorithm::ExpectedSoftActorCritic => ProjectionConfig::for_soft(mdp, sched.lambda_coef),
        }
    }

    pub fn step<R: Rng + ?Sized>(
        self,
        agent: &mut AgentState,
        mdp: &TabularMdp,
        bcfg: &BehaviorPolicyConfig,
        sched: &ScheduleSet,
        proj: &ProjectionConfig,
        rng: &mut R,
    ) -> Result<StepRecord> {
        step(self, agent, mdp, bcfg, sched, proj, rng)
    }
}

/// Clipping bound used on critic values inside the actor update only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub c_pi: f64,
}

impl ProjectionConfig {
    pub fn new(c_pi: f64) -> Result<Self> {
        if c_pi > 0.0 {
            Ok(Self { c_pi })
        } else {
            Err(Error::InvalidParameter(format!("projection bound must be positive, got {c_pi}")))
        }
    }

    /// `r_max / (1 - gamma)`.
    pub fn for_kl(mdp: &TabularMdp) -> Self {
        Self { c_pi: mdp.r_max() / (1.0 - mdp.gamma()) }
    }

    /// `(r_max + lambda log|A|) / (1 - gamma)`, the largest soft value.
    pub fn for_soft(mdp: &TabularMdp, lambda_coef: f64) -> Self {
        let bonus = lambda_coef * (mdp.num_actions() as f64).ln();
        Self { c_pi: (mdp.r_max() + bonus) / (1.0 - mdp.gamma()) }
    }
}

/// `x` if `|x| <= c_pi`, else `c_pi * sign(x)`.
#[inline]
pub fn project(x: f64, proj: &ProjectionConfig) -> f64 {
    x.clamp(-proj.c_pi, proj.c_pi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub params: PolicyParams,
    pub critic: Vec<f64>,
    pub t: u64,
    pub current_state: usize,
}

impl AgentState {
    /// `theta = theta0`, `q = q0` everywhere, `S_0 ~ p0`.
    pub fn new<R: Rng + ?Sized>(mdp: &TabularMdp, theta0: f64, q0: f64, rng: &mut R) -> Result<Self> {
        let current_state = reset_state(mdp, rng)?;
        Ok(Self {
            params: PolicyParams::filled(mdp.num_states(), mdp.num_actions(), theta0),
            critic: vec![q0; mdp.num_pairs()],
            t: 0,
            current_state,
        })
    }
}

fn reset_state<R: Rng + ?Sized>(mdp: &TabularMdp, rng: &mut R) -> Result<usize> {
    for _ in 0..MAX_RESET_DRAWS {
        let s = mdp.sample_initial(rng);
        if !mdp.is_absorbing(s) {
            return Ok(s);
        }
    }
    Err(Error::InvalidMdp("initial distribution keeps drawing absorbing states".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub s: usize,
    pub a: usize,
    pub reward: f64,
    pub s_next: usize,
    pub rho: f64,
    pub delta: f64,
    pub alpha_t: f64,
    pub beta_t: f64,
    pub lambda_t: f64,
}

pub fn alg1_step<R: Rng + ?Sized>(
    agent: &mut AgentState,
    mdp: &TabularMdp,
    bcfg: &BehaviorPolicyConfig,
    sched: &ScheduleSet,
    proj: &ProjectionConfig,
    rng: &mut R,
) -> Result<StepRecord> {
    step(Algorithm::KlActorCritic, agent, mdp, bcfg, sched, proj, rng)
}

pub fn alg2_step<R: Rng + ?Sized>(
    agent: &mut AgentState,
    mdp: &TabularMdp,
    bcfg: &BehaviorPolicyConfig,
    sched: &ScheduleSet,
    proj: &ProjectionConfig,
    rng: &mut R,
) -> Result<StepRecord> {
    step(Algorithm::ExpectedSoftActorCritic, agent, mdp, bcfg, sched, proj, rng)
}

const MAX_ACTIONS: usize = 16;

fn step<R: Rng + ?Sized>(
    algorithm: Algorithm,
    agent: &mut AgentState,
    mdp: &TabularMdp,
    bcfg: &BehaviorPolicyConfig,
    sched: &ScheduleSet,
    proj: &ProjectionConfig,
    rng: &mut R,
) -> Result<StepRecord> {
    let na = mdp.num_actions();
    if na > MAX_ACTIONS {
        return Err(Error::InvalidParameter(format!("at most {MAX_ACTIONS} actions supported, got {na}")));
    }
    let t = agent.t;
    let s = agent.current_state;
    let rates = sched.rates(t);

    let mut mu = [0.0; MAX_ACTIONS];
    let mu = &mut mu[..na];
    agent.params.mu_into(bcfg, s, mu);
    let a = sample_index(mu, rng);
    let (reward, s_next) = mdp.step_unchecked(s, a, rng);

    let family = match algorithm {
        Algorithm::KlActorCritic => ExpectedSarsa::new(mdp),
        Algorithm::ExpectedSoftActorCritic => ExpectedSarsa::soft(mdp, rates.lambda)?,
    };
    let y = Transition { state: s, action: a, next_state: s_next };
    let delta = family.td_error(&agent.params, &agent.critic, &y, reward);
    if !delta.is_finite() {
        return Err(Error::Diverged { t, reason: format!("non-finite TD error at ({s},{a})") });
    }

    let mut q_row = [0.0; MAX_ACTIONS];
    let q_row = &mut q_row[..na];
    q_row.copy_from_slice(&agent.critic[s * na..(s + 1) * na]);
    agent.critic[s * na + a] += rates.alpha * delta;

    let mut pi = [0.0; MAX_ACTIONS];
    let pi = &mut pi[..na];
    softmax_into(agent.params.logits(s), 1.0, pi);
    let rho = pi[a] / mu[a];

    let mut increment = [0.0; MAX_ACTIONS];
    let increment = &mut increment[..na];
    match algorithm {
        Algorithm::KlActorCritic => {
            let weight = rho * project(q_row[a], proj);
            let uniform = 1.0 / na as f64;
            for b in 0..na {
                let score = if b == a { 1.0 - pi[b] } else { -pi[b] };
                increment[b] = weight * score - rates.lambda * (pi[b] - uniform);
            }
        }
        Algorithm::ExpectedSoftActorCritic => {
            let mut log_pi = [0.0; MAX_ACTIONS];
            let log_pi = &mut log_pi[..na];
            log_softmax_into(agent.params.logits(s), log_pi);
            let mut c = [0.0; MAX_ACTIONS];
            let c = &mut c[..na];
            for b in 0..na {
                c[b] = project(q_row[b], proj) - rates.lambda * log_pi[b];
            }
            let baseline: f64 = pi.iter().zip(c.iter()).map(|(p, x)| p * x).sum();
            for b in 0..na {
                increment[b] = pi[b] * (c[b] - baseline);
            }
        }
    }
    let row = agent.params.logits_mut(s);
    for (theta, inc) in row.iter_mut().zip(increment.iter()) {
        *theta += rates.beta * inc;
    }
    if let Some(bad) = row.iter().find(|x| !(x.abs() <= THETA_LIMIT)) {
        return Err(Error::Diverged { t, reason: format!("theta entry {bad} in state {s} exceeds {THETA_LIMIT:e}") });
    }

    agent.current_state = if mdp.is_absorbing(s_next) { reset_state(mdp, rng)? } else { s_next };
    agent.t += 1;

    Ok(StepRecord {
        t,
        s,
        a,
        reward,
        s_next,
        rho,
        delta,
        alpha_t: rates.alpha,
        beta_t: rates.beta,
        lambda_t: rates.lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Monte Carlo episodes under `pi_theta` from `p0`.
    Sampled,
    /// `sum_s p0(s) v_pi(s)` from the exact solver.
    Exact,
}

/// Mean discounted episodic return of `pi_theta`.
pub fn evaluate_policy<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    params: &PolicyParams,
    episodes: usize,
    rng: &mut R,
    mode: EvalMode,
) -> Result<f64> {
    match mode {
        EvalMode::Exact => {
            let tables = exact_q(mdp, &params.target_policy())?;
            Ok(objective(&tables, mdp.initial_dist()))
        }
        EvalMode::Sampled => {
            if episodes == 0 {
                return Err(Error::InvalidParameter("need at least one evaluation episode".into()));
            }
            let returns = sample_returns(mdp, params, episodes, rng);
            Ok(returns.iter().sum::<f64>() / episodes as f64)
        }
    }
}

/// Discounted returns of `episodes` independent episodes. Each episode ends
/// on reaching an absorbing state or after `10 |S|` steps.
pub fn sample_returns<R: Rng + ?Sized>(mdp: &TabularMdp, params: &PolicyParams, episodes: usize, rng: &mut R) -> Vec<f64> {
    let cap = 10 * mdp.num_states();
    let pi = params.target_policy();
    (0..episodes)
        .map(|_| {
            let mut s = mdp.sample_initial(rng);
            let mut total = 0.0;
            let mut discount = 1.0;
            for _ in 0..cap {
                if mdp.is_absorbing(s) {
                    break;
                }
                let a = sample_index(pi.row(s), rng);
                let (r, next) = mdp.step_unchecked(s, a, rng);
                total += discount * r;
                discount *= mdp.gamma();
                s = next;
            }
            total
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{chain_domain, ChainSpec, DOTTED, SOLID};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn projection_examples() {
        let proj = ProjectionConfig::new(100.0).unwrap();
        assert_eq!(project(150.0, &proj), 100.0);
        assert_eq!(project(-50.0, &proj), -50.0);
        assert_eq!(project(-150.0, &proj), -100.0);
        assert!(ProjectionConfig::new(0.0).is_err());
    }

    #[test]
    fn projection_bounds() {
        let mdp = chain_domain(ChainSpec::new(6, 0.99)).unwrap();
        assert!((ProjectionConfig::for_kl(&mdp).c_pi - 100.0).abs() < 1e-9);
        let soft = ProjectionConfig::for_soft(&mdp, 0.025);
        assert!((soft.c_pi - (1.0 + 0.025 * 2f64.ln()) / 0.01).abs() < 1e-9);
    }

    fn deterministic_params(n: usize, action: usize) -> PolicyParams {
        let mut p = PolicyParams::zeros(n + 1, 2);
        for s in 0..=n {
            p.logits_mut(s)[action] = 800.0;
        }
        p
    }

    #[test]
    fn evaluation_of_deterministic_chain_policies() {
        let mdp = chain_domain(ChainSpec::new(6, 0.99)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let optimal = 0.99f64.powi(5);
        for (action, expected) in [(SOLID, optimal), (DOTTED, 0.8 * optimal)] {
            let p = deterministic_params(6, action);
            let exact = evaluate_policy(&mdp, &p, 0, &mut rng, EvalMode::Exact).unwrap();
            let sampled = evaluate_policy(&mdp, &p, 10, &mut rng, EvalMode::Sampled).unwrap();
            assert!((exact - expected).abs() < 1e-12);
            assert!((sampled - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_state_gives_zero_actor_update() {
        let mdp = chain_domain(ChainSpec::new(4, 0.99)).unwrap();
        let sched = ScheduleSet::chain_experiment(0.5);
        let bcfg = BehaviorPolicyConfig::default();
        for algorithm in [Algorithm::KlActorCritic, Algorithm::ExpectedSoftActorCritic] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut agent = AgentState::new(&mdp, 0.0, 0.0, &mut rng).unwrap();
            let proj = algorithm.projection(&mdp, &sched);
            // First step from s_1 never reaches a reward-bearing solid transition.
            let rec = algorithm.step(&mut agent, &mdp, &bcfg, &sched, &proj, &mut rng).unwrap();
            assert_eq!(rec.s, 0);
            assert!(agent.params.theta().iter().all(|&x| x.abs() < 1e-18), "{:?}", agent.params.theta());
        }
    }

    #[test]
    fn actor_clips_but_critic_does_not() {
        let mdp = chain_domain(ChainSpec::new(3, 0.9)).unwrap();
        let sched = ScheduleSet::chain_experiment(0.5);
        let bcfg = BehaviorPolicyConfig::default();
        let proj = ProjectionConfig::for_kl(&mdp);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agent = AgentState::new(&mdp, 0.0, 2.0 * proj.c_pi, &mut rng).unwrap();
        let before = agent.clone();
        let rec = alg1_step(&mut agent, &mdp, &bcfg, &sched, &proj, &mut rng).unwrap();
        let k = mdp.pair(rec.s, rec.a);
        assert_eq!(agent.critic[k], 2.0 * proj.c_pi + rec.alpha_t * rec.delta);
        let pi = before.params.pi(rec.s);
        for b in 0..2 {
            let score = if b == rec.a { 1.0 - pi[b] } else { -pi[b] };
            let expected = rec.beta_t * rec.rho * proj.c_pi * score;
            assert!((agent.params.logits(rec.s)[b] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn absorbing_next_state_resets() {
        let mdp = chain_domain(ChainSpec::new(2, 0.9)).unwrap();
        let sched = ScheduleSet::chain_experiment(0.5);
        let bcfg = BehaviorPolicyConfig::default();
        let proj = ProjectionConfig::for_kl(&mdp);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut agent = AgentState::new(&mdp, 0.0, 0.0, &mut rng).unwrap();
        for _ in 0..1000 {
            let rec = alg1_step(&mut agent, &mdp, &bcfg, &sched, &proj, &mut rng).unwrap();
            if rec.s_next == 2 {
                assert_eq!(agent.current_state, 0);
            }
            assert_ne!(agent.current_state, 2);
        }
        assert_eq!(agent.t, 1000);
    }

    #[test]
    fn divergence_is_reported() {
        let mdp = chain_domain(ChainSpec::new(2, 0.9)).unwrap();
        let sched = ScheduleSet { beta_coef: 1e30, alpha_coef: 1e31, ..ScheduleSet::chain_experiment(0.5) };
        let bcfg = BehaviorPolicyConfig::default();
        let proj = ProjectionConfig::for_kl(&mdp);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut agent = AgentState::new(&mdp, 0.0, 0.0, &mut rng).unwrap();
        let err = (0..100).find_map(|_| alg1_step(&mut agent, &mdp, &bcfg, &sched, &proj, &mut rng).err());
        assert!(matches!(err, Some(Error::Diverged { .. })));
    }
}
