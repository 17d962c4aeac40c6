use serde::{Deserialize, Serialize};

use super::values::{discounted_occupancy, exact_q, exact_soft_q_for_params, objective};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::PolicyParams;

/// Which regularizer the objective carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// `J - eta * E_{s ~ U_S} KL(U_A || pi(.|s))`.
    KlUniform,
    /// `J~_eta = sum_s start(s) v~_{pi,eta}(s)`.
    Entropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGradient {
    /// Unregularized `J(pi; start)`.
    pub j: f64,
    /// Regularized objective.
    pub j_reg: f64,
    /// Exact gradient of `j_reg` with respect to `theta`.
    pub grad: Vec<f64>,
}

impl ObjectiveGradient {
    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Exact objective and policy gradient of the softmax policy.
///
/// Unregularized part: `dJ/dtheta[s,a] = d(s) pi(a|s) Adv(s,a) / (1 - gamma)`
/// with `d` the normalized discounted occupancy from `start`. The entropy
/// case uses the soft advantage in place of `Adv`.
pub fn exact_objective_and_gradients(
    mdp: &TabularMdp,
    params: &PolicyParams,
    eta: f64,
    reg: Regularizer,
    start: &[f64],
) -> Result<ObjectiveGradient> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("eta must be a finite nonnegative real, got {eta}")));
    }
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    if params.num_states() != ns || params.num_actions() != na {
        return Err(Error::DimensionMismatch { expected: mdp.num_pairs(), found: params.theta().len() });
    }
    let pi = params.target_policy();
    let tables = exact_q(mdp, &pi)?;
    let occupancy = discounted_occupancy(mdp, &pi, start)?;
    let j = objective(&tables, start);
    let scale = 1.0 / (1.0 - mdp.gamma());

    match reg {
        Regularizer::KlUniform => {
            let uniform = 1.0 / na as f64;
            let state_weight = eta / ns as f64;
            let mean_kl: f64 = (0..ns).map(|s| params.kl_uniform(s)).sum::<f64>() / ns as f64;
            let grad = (0..ns * na)
                .map(|k| {
                    let s = k / na;
                    let p = pi.probs()[k];
                    scale * occupancy[s] * p * tables.adv[k] - state_weight * (p - uniform)
                })
                .collect();
            Ok(ObjectiveGradient { j, j_reg: j - eta * mean_kl, grad })
        }
        Regularizer::Entropy => {
            let soft = exact_soft_q_for_params(mdp, params, eta)?;
            let j_reg = soft.v_soft.iter().zip(start).map(|(v, p)| v * p).sum();
            let grad = (0..ns * na)
                .map(|k| scale * occupancy[k / na] * pi.probs()[k] * soft.adv_soft[k])
                .collect();
            Ok(ObjectiveGradient { j, j_reg, grad })
        }
    }
}
