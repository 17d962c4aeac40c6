//! Finite MDPs, their validation, and the chain benchmark.
//!
//! State-action pairs are flattened row-major as `s * num_actions + a`
//! everywhere in the crate. Transitions are flattened as
//! `(s * num_actions + a) * num_states + s'`.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum and initial-distribution tolerance.
pub const PROB_TOL: f64 = 1e-12;

/// A finite discounted MDP `(S, A, p, r, gamma, p0)`.
///
/// Immutable after construction. Shapes are checked by [`TabularMdp::new`];
/// probabilistic invariants are reported by [`TabularMdp::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    r_max: f64,
    transition: Vec<f64>,
    reward: Vec<f64>,
    initial: Vec<f64>,
}

/// One invariant violation found by [`TabularMdp::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum { state: usize, action: usize, sum: f64 },
    TransitionEntry { state: usize, action: usize, next: usize, value: f64 },
    RewardBound { state: usize, action: usize, value: f64 },
    InitialSum { sum: f64 },
    InitialEntry { state: usize, value: f64 },
    Gamma(f64),
    RMax(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, action, sum } => {
                write!(f, "transition row ({state},{action}) sums to {sum}")
            }
            Violation::TransitionEntry { state, action, next, value } => {
                write!(f, "transition[{state},{action},{next}] = {value} outside [0,1]")
            }
            Violation::RewardBound { state, action, value } => {
                write!(f, "|reward[{state},{action}]| = {} exceeds r_max", value.abs())
            }
            Violation::InitialSum { sum } => write!(f, "initial distribution sums to {sum}"),
            Violation::InitialEntry { state, value } => {
                write!(f, "initial[{state}] = {value} outside [0,1]")
            }
            Violation::Gamma(g) => write!(f, "gamma = {g} outside [0,1)"),
            Violation::RMax(r) => write!(f, "r_max = {r} is not positive"),
        }
    }
}

impl TabularMdp {
    /// Builds an MDP from flat arrays. Only array shapes are checked here.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        r_max: f64,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp(format!(
                "need at least one state and one action, got |S|={num_states}, |A|={num_actions}"
            )));
        }
        let pairs = num_states * num_actions;
        let check = |found: usize, expected: usize| {
            if found == expected {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, found })
            }
        };
        check(transition.len(), pairs * num_states)?;
        check(reward.len(), pairs)?;
        check(initial.len(), num_states)?;
        Ok(Self {
            num_states,
            num_actions,
            gamma,
            r_max,
            transition,
            reward,
            initial,
        })
    }

    /// Like [`TabularMdp::new`] but rejects any invariant violation.
    pub fn new_validated(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        r_max: f64,
        transition: Vec<f64>,
        reward: Vec<f64>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let mdp = Self::new(num_states, num_actions, gamma, r_max, transition, reward, initial)?;
        mdp.ensure_valid()?;
        Ok(mdp)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    #[inline]
    pub fn pair(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    /// `p(. | s, a)`.
    #[inline]
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let start = self.pair(s, a) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[self.pair(s, a)]
    }

    /// Rewards flattened over state-action pairs.
    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial
    }

    /// Returns every invariant violation; empty iff the MDP is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(0.0..1.0).contains(&self.gamma) {
            out.push(Violation::Gamma(self.gamma));
        }
        if !(self.r_max > 0.0) {
            out.push(Violation::RMax(self.r_max));
        }
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let row = self.transition(s, a);
                for (next, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        out.push(Violation::TransitionEntry { state: s, action: a, next, value: p });
                    }
                }
                let sum: f64 = row.iter().sum();
                if !((sum - 1.0).abs() <= PROB_TOL) {
                    out.push(Violation::RowSum { state: s, action: a, sum });
                }
                let r = self.reward(s, a);
                if !(r.abs() <= self.r_max) {
                    out.push(Violation::RewardBound { state: s, action: a, value: r });
                }
            }
        }
        for (s, &p) in self.initial.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                out.push(Violation::InitialEntry { state: s, value: p });
            }
        }
        let sum: f64 = self.initial.iter().sum();
        if !((sum - 1.0).abs() <= PROB_TOL) {
            out.push(Violation::InitialSum { sum });
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            return Ok(());
        }
        let msg = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidMdp(msg))
    }

    /// A state is absorbing when every action loops back to it with
    /// probability one and zero reward.
    pub fn is_absorbing(&self, s: usize) -> bool {
        (0..self.num_actions).all(|a| self.transition(s, a)[s] == 1.0 && self.reward(s, a) == 0.0)
    }

    /// States that are not absorbing. The sampling process never sits in an
    /// absorbing state: reaching one triggers a reset to `p0`.
    pub fn live_states(&self) -> Vec<usize> {
        (0..self.num_states).filter(|&s| !self.is_absorbing(s)).collect()
    }

    pub fn check_state(&self, s: usize) -> Result<()> {
        if s < self.num_states {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { what: "state", index: s, size: self.num_states })
        }
    }

    pub fn check_action(&self, a: usize) -> Result<()> {
        if a < self.num_actions {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { what: "action", index: a, size: self.num_actions })
        }
    }

    /// Samples `(reward, next_state)` from `(s, a)`.
    pub fn step<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Result<(f64, usize)> {
        self.check_state(s)?;
        self.check_action(a)?;
        Ok(self.step_unchecked(s, a, rng))
    }

    #[inline]
    pub(crate) fn step_unchecked<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> (f64, usize) {
        let next = sample_index(self.transition(s, a), rng);
        (self.reward(s, a), next)
    }

    /// Draws a start state from `p0`.
    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.initial, rng)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates an MDP file.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: TabularMdp = serde_json::from_str(text)?;
        let mdp = Self::new(
            raw.num_states,
            raw.num_actions,
            raw.gamma,
            raw.r_max,
            raw.transition,
            raw.reward,
            raw.initial,
        )?;
        mdp.ensure_valid()?;
        Ok(mdp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Inverse-CDF sampling from a probability vector. Consumes exactly one
/// uniform draw so trajectories are reproducible from the rng state.
#[inline]
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Parameters of the chain benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    /// Number of non-terminal states.
    pub n: usize,
    pub gamma: f64,
}

impl ChainSpec {
    pub fn new(n: usize, gamma: f64) -> Self {
        Self { n, gamma }
    }
}

pub const SOLID: usize = 0;
pub const DOTTED: usize = 1;

/// Builds the chain domain.
///
/// States `0..n` are `s_1..s_N`; state `n` is the absorbing terminal. `SOLID`
/// moves `s_i -> s_{i+1}` with reward 0 and from `s_N` to the terminal with
/// reward 1. `DOTTED` jumps to the terminal with reward `0.8 * gamma^(N-1)`.
/// The episodic task is expressed through the zero-reward absorbing state.
pub fn chain_domain(spec: ChainSpec) -> Result<TabularMdp> {
    let n = spec.n;
    if n < 2 {
        return Err(Error::ChainTooShort(n));
    }
    if !(0.0..1.0).contains(&spec.gamma) {
        return Err(Error::InvalidMdp(format!("gamma = {} outside [0,1)", spec.gamma)));
    }
    let num_states = n + 1;
    let terminal = n;
    let num_actions = 2;
    let mut transition = vec![0.0; num_states * num_actions * num_states];
    let mut reward = vec![0.0; num_states * num_actions];
    let dotted_reward = 0.8 * spec.gamma.powi(n as i32 - 1);
    let idx = |s: usize, a: usize| s * num_actions + a;
    for s in 0..n {
        let solid_next = if s + 1 < n { s + 1 } else { terminal };
        transition[idx(s, SOLID) * num_states + solid_next] = 1.0;
        reward[idx(s, SOLID)] = if s + 1 == n { 1.0 } else { 0.0 };
        transition[idx(s, DOTTED) * num_states + terminal] = 1.0;
        reward[idx(s, DOTTED)] = dotted_reward;
    }
    for a in 0..num_actions {
        transition[idx(terminal, a) * num_states + terminal] = 1.0;
    }
    let mut initial = vec![0.0; num_states];
    initial[0] = 1.0;
    TabularMdp::new(num_states, num_actions, spec.gamma, 1.0, transition, reward, initial)
}
