use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{check_policy_shape, pair_transition_matrix, solve_checked, state_transition_matrix};
use crate::mdp::TabularMdp;
use crate::policy::{PolicyParams, StochasticPolicy};

/// `q_pi`, `v_pi` and `Adv_pi = q_pi - v_pi`, flattened over pairs / states.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub adv: Vec<f64>,
}

/// Soft values under reward augmented with `eta * H(pi(.|s))`.
///
/// `adv_soft = q_soft - eta * log pi - v_soft`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftValueTables {
    pub q_soft: Vec<f64>,
    pub v_soft: Vec<f64>,
    pub adv_soft: Vec<f64>,
    pub eta: f64,
}

/// Solves `(I - gamma P_pi) q = r`.
pub fn exact_q(mdp: &TabularMdp, pi: &StochasticPolicy) -> Result<ValueTables> {
    check_policy_shape(mdp, pi)?;
    let q = solve_pair_system(mdp, pi, DVector::from_column_slice(mdp.rewards()))?;
    Ok(tables_from_q(mdp, pi, q.as_slice().to_vec()))
}

fn solve_pair_system(mdp: &TabularMdp, pi: &StochasticPolicy, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let k = mdp.num_pairs();
    let m = DMatrix::identity(k, k) - pair_transition_matrix(mdp, pi) * mdp.gamma();
    solve_checked(m, &rhs)
}

fn tables_from_q(mdp: &TabularMdp, pi: &StochasticPolicy, q: Vec<f64>) -> ValueTables {
    let na = mdp.num_actions();
    let v: Vec<f64> = (0..mdp.num_states())
        .map(|s| pi.row(s).iter().zip(&q[s * na..(s + 1) * na]).map(|(p, x)| p * x).sum())
        .collect();
    let adv = q.iter().enumerate().map(|(i, x)| x - v[i / na]).collect();
    ValueTables { q, v, adv }
}

/// Soft action values of `pi`. Rejects `eta > 0` when some `pi(a|s) = 0`;
/// at `eta = 0` the result is exactly [`exact_q`].
pub fn exact_soft_q(mdp: &TabularMdp, pi: &StochasticPolicy, eta: f64) -> Result<SoftValueTables> {
    check_policy_shape(mdp, pi)?;
    check_eta(eta)?;
    if eta == 0.0 {
        let tables = exact_q(mdp, pi)?;
        return Ok(SoftValueTables { q_soft: tables.q, v_soft: tables.v, adv_soft: tables.adv, eta });
    }
    let na = mdp.num_actions();
    if let Some(i) = pi.probs().iter().position(|&p| p <= 0.0) {
        return Err(Error::ZeroProbability { eta, state: i / na, action: i % na });
    }
    let log_pi: Vec<f64> = pi.probs().iter().map(|p| p.ln()).collect();
    soft_tables(mdp, pi, &log_pi, eta)
}

/// Soft action values of the softmax policy, using log-softmax so that
/// hardened policies with underflowing probabilities stay finite.
pub fn exact_soft_q_for_params(mdp: &TabularMdp, params: &PolicyParams, eta: f64) -> Result<SoftValueTables> {
    check_eta(eta)?;
    let pi = params.target_policy();
    check_policy_shape(mdp, &pi)?;
    if eta == 0.0 {
        return exact_soft_q(mdp, &pi, 0.0);
    }
    let log_pi: Vec<f64> = (0..mdp.num_states()).flat_map(|s| params.log_pi(s)).collect();
    soft_tables(mdp, &pi, &log_pi, eta)
}

fn check_eta(eta: f64) -> Result<()> {
    if eta >= 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eta must be a finite nonnegative real, got {eta}")))
    }
}

fn soft_tables(mdp: &TabularMdp, pi: &StochasticPolicy, log_pi: &[f64], eta: f64) -> Result<SoftValueTables> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    // Per-state entropy bonus eta * H(pi(.|s')), folded into the bootstrap.
    let bonus: Vec<f64> = (0..ns)
        .map(|s| -eta * pi.row(s).iter().zip(&log_pi[s * na..(s + 1) * na]).map(|(p, l)| p * l).sum::<f64>())
        .collect();
    let gamma = mdp.gamma();
    let rhs = DVector::from_iterator(
        ns * na,
        (0..ns).flat_map(|s| (0..na).map(move |a| (s, a))).map(|(s, a)| {
            let next: f64 = mdp.transition(s, a).iter().zip(&bonus).map(|(p, b)| p * b).sum();
            mdp.reward(s, a) + gamma * next
        }),
    );
    let q_soft = solve_pair_system(mdp, pi, rhs)?.as_slice().to_vec();
    let v_soft: Vec<f64> = (0..ns)
        .map(|s| {
            (0..na)
                .map(|a| pi.row(s)[a] * (q_soft[s * na + a] - eta * log_pi[s * na + a]))
                .sum()
        })
        .collect();
    let adv_soft = (0..ns * na)
        .map(|i| q_soft[i] - eta * log_pi[i] - v_soft[i / na])
        .collect();
    Ok(SoftValueTables { q_soft, v_soft, adv_soft, eta })
}

/// Normalized discounted state occupancy `(1 - gamma) (I - gamma P_pi^T)^{-1} start`.
pub fn discounted_occupancy(mdp: &TabularMdp, pi: &StochasticPolicy, start: &[f64]) -> Result<Vec<f64>> {
    check_policy_shape(mdp, pi)?;
    let ns = mdp.num_states();
    if start.len() != ns {
        return Err(Error::DimensionMismatch { expected: ns, found: start.len() });
    }
    let gamma = mdp.gamma();
    let m = DMatrix::identity(ns, ns) - state_transition_matrix(mdp, pi).transpose() * gamma;
    let x = solve_checked(m, &DVector::from_column_slice(start))?;
    Ok(x.iter().map(|v| (1.0 - gamma) * v).collect())
}

/// An optimal deterministic policy with its exact values.
///
/// Value iteration to `1e-12` picks a greedy policy, then policy iteration
/// with exact evaluation polishes it until no action improves.
pub fn optimal_policy(mdp: &TabularMdp) -> Result<(StochasticPolicy, ValueTables)> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.gamma();
    let backup = |v: &[f64], s: usize, a: usize| {
        mdp.reward(s, a) + gamma * mdp.transition(s, a).iter().zip(v).map(|(p, x)| p * x).sum::<f64>()
    };
    let mut v = vec![0.0; ns];
    for _ in 0..1_000_000 {
        let next: Vec<f64> = (0..ns)
            .map(|s| (0..na).map(|a| backup(&v, s, a)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let change = crate::linalg::max_abs_diff(&next, &v);
        v = next;
        if change <= 1e-12 {
            break;
        }
    }
    let greedy = |v: &[f64]| -> Vec<usize> {
        (0..ns)
            .map(|s| {
                let mut best = 0;
                for a in 1..na {
                    if backup(v, s, a) > backup(v, s, best) + 1e-12 {
                        best = a;
                    }
                }
                best
            })
            .collect()
    };
    let mut actions = greedy(&v);
    for _ in 0..(ns * na + 10) {
        let pi = StochasticPolicy::deterministic(na, &actions);
        let tables = exact_q(mdp, &pi)?;
        let improved = greedy(&tables.v);
        let better = (0..ns).any(|s| {
            backup(&tables.v, s, improved[s]) > backup(&tables.v, s, actions[s]) + 1e-12
        });
        if !better {
            return Ok((pi, tables));
        }
        actions = improved;
    }
    let pi = StochasticPolicy::deterministic(na, &actions);
    let tables = exact_q(mdp, &pi)?;
    Ok((pi, tables))
}

/// `J(pi; start) = sum_s start(s) v_pi(s)`.
pub fn objective(tables: &ValueTables, start: &[f64]) -> f64 {
    tables.v.iter().zip(start).map(|(v, p)| v * p).sum()
}
