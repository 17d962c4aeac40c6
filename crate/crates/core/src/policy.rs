//! Softmax target policy, mixture behavior policy, and closed-form gradients.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Softmax logits `theta[s * |A| + a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    num_states: usize,
    num_actions: usize,
    theta: Vec<f64>,
}

/// Mixture behavior policy
/// `mu(.|s) = (1 - epsilon) * uniform + epsilon * softmax(temperature * theta[s, .])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPolicyConfig {
    pub epsilon: f64,
    pub temperature: f64,
}

impl Default for BehaviorPolicyConfig {
    fn default() -> Self {
        Self { epsilon: 0.9, temperature: 0.1 }
    }
}

impl BehaviorPolicyConfig {
    pub fn new(epsilon: f64, temperature: f64) -> Result<Self> {
        let cfg = Self { epsilon, temperature };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "behavior epsilon must lie in (0,1), got {}",
                self.epsilon
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "behavior temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Smallest probability the mixture can assign to any action.
    pub fn floor(&self, num_actions: usize) -> f64 {
        (1.0 - self.epsilon) / num_actions as f64
    }
}

/// A gradient supported on a single state row of `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGradient {
    pub state: usize,
    pub values: Vec<f64>,
}

impl StateGradient {
    /// Materializes the full `|S| * |A|` vector.
    pub fn to_dense(&self, num_states: usize) -> Vec<f64> {
        let na = self.values.len();
        let mut out = vec![0.0; num_states * na];
        out[self.state * na..(self.state + 1) * na].copy_from_slice(&self.values);
        out
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Per-state action distributions, flattened like `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    num_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch {
                expected: num_states * num_actions,
                found: probs.len(),
            });
        }
        Ok(Self { num_actions, probs })
    }

    /// Puts all mass on `actions[s]` in each state.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * num_actions + a] = 1.0;
        }
        Self { num_actions, probs }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Numerically stable softmax of `scale * logits` written into `out`.
#[inline]
pub fn softmax_into(logits: &[f64], scale: f64, out: &mut [f64]) {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(scale * x));
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(logits) {
        *o = (scale * x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Numerically stable log-softmax written into `out`.
#[inline]
pub fn log_softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let lse = max + logits.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    for (o, &x) in out.iter_mut().zip(logits) {
        *o = x - lse;
    }
}

impl PolicyParams {
    pub fn new(num_states: usize, num_actions: usize, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch {
                expected: num_states * num_actions,
                found: theta.len(),
            });
        }
        if let Some(i) = theta.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("theta[{i}] = {} is not finite", theta[i])));
        }
        Ok(Self { num_states, num_actions, theta })
    }

    /// All-zero logits: the uniform policy.
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self::filled(num_states, num_actions, 0.0)
    }

    pub fn filled(num_states: usize, num_actions: usize, value: f64) -> Self {
        Self { num_states, num_actions, theta: vec![value; num_states * num_actions] }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    #[inline]
    pub fn logits(&self, s: usize) -> &[f64] {
        &self.theta[s * self.num_actions..(s + 1) * self.num_actions]
    }

    #[inline]
    pub fn logits_mut(&mut self, s: usize) -> &mut [f64] {
        let na = self.num_actions;
        &mut self.theta[s * na..(s + 1) * na]
    }

    /// `pi(.|s)`.
    pub fn pi(&self, s: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_actions];
        self.pi_into(s, &mut out);
        out
    }

    #[inline]
    pub fn pi_into(&self, s: usize, out: &mut [f64]) {
        softmax_into(self.logits(s), 1.0, out);
    }

    /// `log pi(.|s)`, finite even when `pi` underflows.
    pub fn log_pi(&self, s: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_actions];
        log_softmax_into(self.logits(s), &mut out);
        out
    }

    /// `mu(.|s)` for the mixture behavior policy.
    pub fn mu(&self, cfg: &BehaviorPolicyConfig, s: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_actions];
        self.mu_into(cfg, s, &mut out);
        out
    }

    #[inline]
    pub fn mu_into(&self, cfg: &BehaviorPolicyConfig, s: usize, out: &mut [f64]) {
        softmax_into(self.logits(s), cfg.temperature, out);
        let floor = cfg.floor(self.num_actions);
        for o in out.iter_mut() {
            *o = floor + cfg.epsilon * *o;
        }
    }

    pub fn target_policy(&self) -> StochasticPolicy {
        let mut probs = vec![0.0; self.theta.len()];
        for s in 0..self.num_states {
            let na = self.num_actions;
            self.pi_into(s, &mut probs[s * na..(s + 1) * na]);
        }
        StochasticPolicy { num_actions: self.num_actions, probs }
    }

    pub fn behavior_policy(&self, cfg: &BehaviorPolicyConfig) -> StochasticPolicy {
        let mut probs = vec![0.0; self.theta.len()];
        for s in 0..self.num_states {
            let na = self.num_actions;
            self.mu_into(cfg, s, &mut probs[s * na..(s + 1) * na]);
        }
        StochasticPolicy { num_actions: self.num_actions, probs }
    }

    /// `grad_theta log pi(a|s)`: row `s` holds `1{a = a'} - pi(a'|s)`.
    pub fn grad_log_pi(&self, s: usize, a: usize) -> StateGradient {
        let mut values = self.pi(s);
        for (b, v) in values.iter_mut().enumerate() {
            *v = if a == b { 1.0 - *v } else { -*v };
        }
        StateGradient { state: s, values }
    }

    /// `KL(uniform || pi(.|s))`.
    pub fn kl_uniform(&self, s: usize) -> f64 {
        let na = self.num_actions as f64;
        let log_u = -na.ln();
        self.log_pi(s).iter().map(|lp| (log_u - lp) / na).sum()
    }

    /// Gradient of `KL(uniform || pi(.|s))`: row `s` holds `pi(a'|s) - 1/|A|`.
    pub fn grad_kl_uniform(&self, s: usize) -> StateGradient {
        let u = 1.0 / self.num_actions as f64;
        let values = self.pi(s).into_iter().map(|p| p - u).collect();
        StateGradient { state: s, values }
    }

    /// Shannon entropy of `pi(.|s)` in nats.
    pub fn entropy(&self, s: usize) -> f64 {
        let pi = self.pi(s);
        let log_pi = self.log_pi(s);
        -pi.iter().zip(&log_pi).map(|(p, lp)| p * lp).sum::<f64>()
    }

    /// Row `s` holds `-pi(a'|s) * (H(pi(.|s)) + log pi(a'|s))`.
    pub fn grad_entropy(&self, s: usize) -> StateGradient {
        let pi = self.pi(s);
        let log_pi = self.log_pi(s);
        let h = -pi.iter().zip(&log_pi).map(|(p, lp)| p * lp).sum::<f64>();
        let values = pi.iter().zip(&log_pi).map(|(p, lp)| -p * (h + lp)).collect();
        StateGradient { state: s, values }
    }

    /// `rho = pi(a|s) / mu(a|s)`.
    pub fn importance_ratio(&self, cfg: &BehaviorPolicyConfig, s: usize, a: usize) -> f64 {
        self.pi(s)[a] / self.mu(cfg, s)[a]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: PolicyParams = serde_json::from_str(text)?;
        Self::new(raw.num_states, raw.num_actions, raw.theta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
