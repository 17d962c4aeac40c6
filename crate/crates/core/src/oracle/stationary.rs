use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::StochasticPolicy;

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITERS: usize = 1_000_000;
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

/// Invariant distribution `d^T P = d^T` of a stochastic matrix.
///
/// Power iteration first, polished by (or, if it has not settled after the
/// iteration cap, replaced by) the normalized linear system
/// `(P^T - I) d = 0, 1^T d = 1`.
/// A singular system, a negative solution, or a large residual means the
/// chain has no unique invariant distribution.
pub fn stationary_distribution(chain: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = chain.nrows();
    if n == 0 || chain.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: chain.ncols() });
    }
    for (i, row) in chain.row_iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-10 || row.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidParameter(format!("row {i} of the chain is not a distribution (sum {sum})")));
        }
    }

    let closed = closed_classes(chain);
    if closed != 1 {
        return Err(Error::NonErgodic(format!("{closed} closed communicating classes")));
    }

    let transposed = chain.transpose();
    let mut d = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..POWER_MAX_ITERS {
        let mut next = &transposed * &d;
        let total = next.sum();
        next /= total;
        let change = (&next - &d).abs().sum();
        d = next;
        if change <= POWER_TOL {
            // A step change of POWER_TOL can still leave the iterate
            // change / (1 - rate) away from the fixed point; the direct
            // solution polishes it when it is at least as good.
            let power = d.as_slice().to_vec();
            let best = match linear_solution(chain) {
                Ok(direct) if residual(chain, &direct) <= residual(chain, &power) => direct,
                _ => power,
            };
            return finish(chain, best);
        }
    }
    finish(chain, linear_solution(chain)?)
}

/// Solves `(P^T - I) d = 0, 1^T d = 1` with one equation replaced by the
/// normalization.
fn linear_solution(chain: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = chain.nrows();
    let mut system = chain.transpose() - DMatrix::identity(n, n);
    system.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let solved = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonErgodic("invariant-distribution system is singular".into()))?;
    if solved.iter().any(|&x| x < -1e-12) {
        return Err(Error::NonErgodic("invariant-distribution system has a negative solution".into()));
    }
    Ok(solved.iter().map(|x| x.max(0.0)).collect())
}

/// Number of closed communicating classes; an invariant distribution is
/// unique iff there is exactly one.
fn closed_classes(chain: &DMatrix<f64>) -> usize {
    let n = chain.nrows();
    let reach: Vec<Vec<bool>> = (0..n)
        .map(|start| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if chain[(i, j)] > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen
        })
        .collect();
    // i is recurrent iff everything it reaches reaches it back; count classes
    // by their smallest member.
    (0..n)
        .filter(|&i| (0..n).all(|j| !reach[i][j] || reach[j][i]))
        .filter(|&i| (0..i).all(|j| !(reach[i][j] && reach[j][i])))
        .count()
}

fn finish(chain: &DMatrix<f64>, d: Vec<f64>) -> Result<Vec<f64>> {
    let r = residual(chain, &d);
    if !(r <= STATIONARY_RESIDUAL_TOL) {
        return Err(Error::NonErgodic(format!("stationary residual {r:e}")));
    }
    Ok(d)
}

/// `|| d^T P - d^T ||_1`.
pub fn residual(chain: &DMatrix<f64>, d: &[f64]) -> f64 {
    let dv = DVector::from_column_slice(d);
    (chain.transpose() * &dv - dv).abs().sum()
}

/// The state chain the sampling process follows under `policy`, restricted
/// to live (non-absorbing) states. Entering an absorbing state is replaced by
/// a reset drawn from `p0` conditioned on live states.
///
/// Returns the live state indices and the chain over them.
pub fn behavior_state_chain(mdp: &TabularMdp, policy: &StochasticPolicy) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let live = mdp.live_states();
    if live.is_empty() {
        return Err(Error::NonErgodic("every state is absorbing".into()));
    }
    let mut position = vec![usize::MAX; mdp.num_states()];
    for (i, &s) in live.iter().enumerate() {
        position[s] = i;
    }
    let reset_mass: f64 = live.iter().map(|&s| mdp.initial_dist()[s]).sum();
    if reset_mass <= 0.0 {
        return Err(Error::NonErgodic("initial distribution has no mass on live states".into()));
    }
    let reset: Vec<f64> = live.iter().map(|&s| mdp.initial_dist()[s] / reset_mass).collect();

    let m = live.len();
    let mut chain = DMatrix::zeros(m, m);
    for (i, &s) in live.iter().enumerate() {
        for (a, &w) in policy.row(s).iter().enumerate() {
            for (s2, &p) in mdp.transition(s, a).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                if position[s2] != usize::MAX {
                    chain[(i, position[s2])] += w * p;
                } else {
                    for (j, r) in reset.iter().enumerate() {
                        chain[(i, j)] += w * p * r;
                    }
                }
            }
        }
    }
    Ok((live, chain))
}

/// Stationary state-action distribution `d_mu(s) mu(a|s)` of the sampling
/// process, over all pairs (absorbing states carry zero mass).
pub fn sampling_distribution(mdp: &TabularMdp, behavior: &StochasticPolicy) -> Result<Vec<f64>> {
    let (live, chain) = behavior_state_chain(mdp, behavior)?;
    let d = stationary_distribution(&chain)?;
    let mut out = vec![0.0; mdp.num_pairs()];
    for (i, &s) in live.iter().enumerate() {
        for (a, &p) in behavior.row(s).iter().enumerate() {
            out[mdp.pair(s, a)] = d[i] * p;
        }
    }
    Ok(out)
}
