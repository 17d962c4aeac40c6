//! Dense linear-algebra helpers shared by the oracles.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::StochasticPolicy;

/// Residual bound for the dense solves behind the exact oracles.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

/// `l_p` norm for `p >= 1`, including `p = inf`. Scaled by the max entry so
/// very large `p` (the contraction norms reach the thousands) stays finite.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 || p.is_infinite() {
        return max;
    }
    if p == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    if p == 2.0 {
        return x.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let sum: f64 = x.iter().map(|v| (v.abs() / max).powf(p)).sum();
    max * sum.powf(1.0 / p)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// LU solve of `m x = b`, rejecting singular systems and large residuals.
pub fn solve_checked(m: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let check = m.clone();
    let x = m.lu().solve(b).ok_or(Error::SolverResidual {
        residual: f64::INFINITY,
        tolerance: SOLVE_RESIDUAL_TOL,
    })?;
    let residual = (&check * &x - b).amax();
    let scale = b.amax().max(1.0);
    if !(residual <= SOLVE_RESIDUAL_TOL * scale) {
        return Err(Error::SolverResidual { residual, tolerance: SOLVE_RESIDUAL_TOL * scale });
    }
    Ok(x)
}

/// `P_pi[(s,a), (s',a')] = p(s'|s,a) pi(a'|s')`.
pub fn pair_transition_matrix(mdp: &TabularMdp, pi: &StochasticPolicy) -> DMatrix<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let k = ns * na;
    let mut m = DMatrix::zeros(k, k);
    for s in 0..ns {
        for a in 0..na {
            let row = mdp.pair(s, a);
            for (s2, &p) in mdp.transition(s, a).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (a2, &w) in pi.row(s2).iter().enumerate() {
                    m[(row, mdp.pair(s2, a2))] += p * w;
                }
            }
        }
    }
    m
}

/// `P_pi[s, s'] = sum_a pi(a|s) p(s'|s,a)`.
pub fn state_transition_matrix(mdp: &TabularMdp, pi: &StochasticPolicy) -> DMatrix<f64> {
    let ns = mdp.num_states();
    let mut m = DMatrix::zeros(ns, ns);
    for s in 0..ns {
        for (a, &w) in pi.row(s).iter().enumerate() {
            for (s2, &p) in mdp.transition(s, a).iter().enumerate() {
                m[(s, s2)] += w * p;
            }
        }
    }
    m
}

pub(crate) fn check_policy_shape(mdp: &TabularMdp, pi: &StochasticPolicy) -> Result<()> {
    if pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions() {
        return Err(Error::DimensionMismatch { expected: mdp.num_pairs(), found: pi.probs().len() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms() {
        let x = [3.0, -4.0];
        assert_eq!(lp_norm(&x, 2.0), 5.0);
        assert_eq!(lp_norm(&x, 1.0), 7.0);
        assert_eq!(lp_norm(&x, f64::INFINITY), 4.0);
        let big = lp_norm(&x, 5000.0);
        assert!((4.0..4.0 * (1.0 + 1e-3)).contains(&big));
        assert_eq!(lp_norm(&[0.0, 0.0], 7.0), 0.0);
    }

    #[test]
    fn singular_solve_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        assert!(solve_checked(m, &b).is_err());
    }
}
