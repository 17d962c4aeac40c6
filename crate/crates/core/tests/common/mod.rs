//! Independent reference implementations shared by the integration suites
//! and the acceptance binary. Nothing here calls the library's solvers.

#![allow(dead_code)]

use offpac_core::oracle::{exact_objective_and_gradients, Regularizer};
use offpac_core::{ExpectedSarsa, OperatorFamily, PolicyParams, TabularMdp, Transition};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error, so components that are zero
/// analytically are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-3;

pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Dense random MDP with rewards in `[0, 1]` and no absorbing states.
pub fn random_mdp<R: Rng>(rng: &mut R, ns: usize, na: usize, gamma: f64) -> TabularMdp {
    let transition: Vec<f64> = (0..ns * na).flat_map(|_| random_simplex(rng, ns)).collect();
    let reward: Vec<f64> = (0..ns * na).map(|_| rng.random::<f64>()).collect();
    let initial = random_simplex(rng, ns);
    TabularMdp::new_validated(ns, na, gamma, 1.0, transition, reward, initial).unwrap()
}

pub fn random_params<R: Rng>(rng: &mut R, ns: usize, na: usize, scale: f64) -> PolicyParams {
    let theta = (0..ns * na).map(|_| rng.random_range(-scale..=scale)).collect();
    PolicyParams::new(ns, na, theta).unwrap()
}

/// Softmax written out directly, max-shifted.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

pub fn policy_table(ns: usize, na: usize, theta: &[f64]) -> Vec<Vec<f64>> {
    (0..ns).map(|s| softmax(&theta[s * na..(s + 1) * na])).collect()
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / m[row][row];
    }
    x
}

/// State values of `pi` with an extra per-state reward `bonus(s)`:
/// `v = r_pi + bonus + gamma P_pi v`.
pub fn state_values(mdp: &TabularMdp, pi: &[Vec<f64>], bonus: &[f64]) -> Vec<f64> {
    let (ns, na, g) = (mdp.num_states(), mdp.num_actions(), mdp.gamma());
    let mut m = vec![vec![0.0; ns]; ns];
    let mut b = vec![0.0; ns];
    for s in 0..ns {
        m[s][s] += 1.0;
        b[s] = bonus[s];
        for a in 0..na {
            b[s] += pi[s][a] * mdp.reward(s, a);
            for (s2, p) in mdp.transition(s, a).iter().enumerate() {
                m[s][s2] -= g * pi[s][a] * p;
            }
        }
    }
    gauss_solve(m, b)
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

pub fn kl_uniform(p: &[f64]) -> f64 {
    let u = 1.0 / p.len() as f64;
    p.iter().map(|x| u * (u / x).ln()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Plain,
    /// `J - eta mean_s KL(U || pi(.|s))`.
    Kl,
    /// Value with per-step entropy bonus `eta H(pi(.|s))`.
    Entropy,
}

pub fn objective_oracle(mdp: &TabularMdp, theta: &[f64], eta: f64, kind: Objective, start: &[f64]) -> f64 {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let pi = policy_table(ns, na, theta);
    let bonus: Vec<f64> = match kind {
        Objective::Entropy => pi.iter().map(|p| eta * entropy(p)).collect(),
        _ => vec![0.0; ns],
    };
    let v = state_values(mdp, &pi, &bonus);
    let j: f64 = v.iter().zip(start).map(|(v, p)| v * p).sum();
    match kind {
        Objective::Kl => j - eta * pi.iter().map(|p| kl_uniform(p)).sum::<f64>() / ns as f64,
        _ => j,
    }
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + FD_STEP;
            let up = f(&y);
            y[i] = x[i] - FD_STEP;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Largest componentwise `|a - b| / max(|a|, |b|, REL_FLOOR)`.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

/// Stationary distribution by repeated squaring of a row-stochastic matrix,
/// renormalizing rows after each squaring so round-off cannot compound.
pub fn stationary_by_powers(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut m = p.to_vec();
    for _ in 0..40 {
        let mut sq = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                if m[i][k] != 0.0 {
                    for j in 0..n {
                        sq[i][j] += m[i][k] * m[k][j];
                    }
                }
            }
        }
        for row in sq.iter_mut() {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= total);
        }
        m = sq;
    }
    m[0].clone()
}

/// Worst relative error against central differences for, in order:
/// `grad log pi`, `grad KL(U || pi)`, `grad H`, `grad J`, `grad J_eta` (KL)
/// and `grad J~_eta` (entropy), all from a uniform start distribution.
pub fn all_gradient_errors(mdp: &TabularMdp, params: &PolicyParams, eta: f64) -> [f64; 6] {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let theta = params.theta().to_vec();
    let start = vec![1.0 / ns as f64; ns];
    let with = |x: &[f64]| PolicyParams::new(ns, na, x.to_vec()).unwrap();
    let mut worst = [0.0f64; 6];
    for s in 0..ns {
        for a in 0..na {
            let fd = central_difference(|x| with(x).log_pi(s)[a], &theta);
            worst[0] = worst[0].max(max_rel_err(&params.grad_log_pi(s, a).to_dense(ns), &fd));
        }
        let fd = central_difference(|x| with(x).kl_uniform(s), &theta);
        worst[1] = worst[1].max(max_rel_err(&params.grad_kl_uniform(s).to_dense(ns), &fd));
        let fd = central_difference(|x| with(x).entropy(s), &theta);
        worst[2] = worst[2].max(max_rel_err(&params.grad_entropy(s).to_dense(ns), &fd));
    }
    let cases = [
        (3, 0.0, Regularizer::KlUniform, Objective::Plain),
        (4, eta, Regularizer::KlUniform, Objective::Kl),
        (5, eta, Regularizer::Entropy, Objective::Entropy),
    ];
    for (slot, e, reg, kind) in cases {
        let analytic = exact_objective_and_gradients(mdp, params, e, reg, &start).unwrap();
        let fd = central_difference(|x| objective_oracle(mdp, x, e, kind, &start), &theta);
        worst[slot] = max_rel_err(&analytic.grad, &fd);
        let direct = objective_oracle(mdp, &theta, e, kind, &start);
        assert!((analytic.j_reg - direct).abs() < 1e-10, "{kind:?}: {} vs {direct}", analytic.j_reg);
    }
    worst
}

/// `E[F(q, (S, A, S'))]` with `(S, A) ~ d_mu x mu` and `S' ~ p(.|S, A)`.
pub fn averaged_operator(mdp: &TabularMdp, family: &ExpectedSarsa, params: &PolicyParams, q: &[f64], mass: &[f64]) -> Vec<f64> {
    let total: f64 = mass.iter().sum();
    let na = mdp.num_actions();
    let mut out = vec![0.0; q.len()];
    for (k, &w) in mass.iter().enumerate().filter(|(_, w)| **w > 0.0) {
        let (s, a) = (k / na, k % na);
        for (s2, &p) in mdp.transition(s, a).iter().enumerate().filter(|(_, p)| **p > 0.0) {
            let y = Transition { state: s, action: a, next_state: s2 };
            for (o, v) in out.iter_mut().zip(family.apply(params, q, &y).unwrap()) {
                *o += w / total * p * v;
            }
        }
    }
    out
}
