//! Numerical witness that the expected critic operator is a contraction.
//!
//! For the expected-SARSA operator the difference of two images is linear,
//! `F(q) - F(q') = A (q - q')` with `A = I - D (I - gamma P_pi)`, where `D`
//! holds the stationary state-action mass of the behavior process. With
//! nonnegative entries, column sums below 2 and row sums in `(0, kappa0]`,
//! Jensen's inequality gives `||A x||_p <= (2 kappa0^(p-1))^(1/p) ||x||_p`.
//!
//! Absorbing states are excluded: their values are pinned at zero and the
//! sampling process never visits them. Transitions into them therefore drop
//! out of `P_pi`, which only lowers the row sums.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use super::stationary::sampling_distribution;
use crate::error::{Error, Result};
use crate::linalg::lp_norm;
use crate::mdp::TabularMdp;
use crate::policy::{BehaviorPolicyConfig, PolicyParams};

/// Slack for the structural checks on `A`.
pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionCertificate {
    pub p_norm: f64,
    pub kappa0: f64,
    pub kappa: f64,
    pub d_mu_min: f64,
    pub empirical_ratio_max: f64,
    pub min_entry: f64,
    pub max_col_sum: f64,
    pub min_row_sum: f64,
    pub max_row_sum: f64,
}

/// `A` restricted to live pairs, with the live pair indices and their
/// stationary masses.
#[derive(Debug, Clone)]
pub struct ContractionMatrix {
    pub pairs: Vec<usize>,
    pub mass: Vec<f64>,
    pub a: DMatrix<f64>,
    /// `P_pi` restricted to live pairs (substochastic when transitions can
    /// reach an absorbing state).
    pub p_pi: DMatrix<f64>,
}

pub fn contraction_matrix(
    mdp: &TabularMdp,
    params: &PolicyParams,
    cfg: &BehaviorPolicyConfig,
) -> Result<ContractionMatrix> {
    let behavior = params.behavior_policy(cfg);
    let target = params.target_policy();
    let full_mass = sampling_distribution(mdp, &behavior)?;
    let na = mdp.num_actions();
    let live = mdp.live_states();
    let pairs: Vec<usize> = live.iter().flat_map(|&s| (0..na).map(move |a| s * na + a)).collect();
    let mut position = vec![usize::MAX; mdp.num_pairs()];
    for (i, &k) in pairs.iter().enumerate() {
        position[k] = i;
    }
    let m = pairs.len();
    let mut p_pi = DMatrix::zeros(m, m);
    for (i, &k) in pairs.iter().enumerate() {
        let (s, a) = (k / na, k % na);
        for (s2, &p) in mdp.transition(s, a).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (a2, &w) in target.row(s2).iter().enumerate() {
                let j = position[s2 * na + a2];
                if j != usize::MAX {
                    p_pi[(i, j)] += p * w;
                }
            }
        }
    }
    let mass: Vec<f64> = pairs.iter().map(|&k| full_mass[k]).collect();
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(&mass));
    let identity = DMatrix::identity(m, m);
    let a = &identity - d * (&identity - &p_pi * mdp.gamma());
    Ok(ContractionMatrix { pairs, mass, a, p_pi })
}

/// Smallest even `p >= 2` with `2 kappa0^(p-1) < 1`.
pub fn norm_index(kappa0: f64) -> f64 {
    if kappa0 <= 0.0 {
        return 2.0;
    }
    let holds = |p: f64| (2f64).ln() + (p - 1.0) * kappa0.ln() < 0.0;
    // (p - 1) ln kappa0 < -ln 2  <=>  p > 1 + ln 2 / -ln kappa0
    let bound = 1.0 + (2f64).ln() / -kappa0.ln();
    let mut p = (bound.floor() + 1.0).max(2.0);
    if p % 2.0 != 0.0 {
        p += 1.0;
    }
    while p > 2.0 && holds(p - 2.0) {
        p -= 2.0;
    }
    while !holds(p) {
        p += 2.0;
    }
    p
}

/// `kappa = (2 kappa0^(p-1))^(1/p)`.
pub fn contraction_factor(kappa0: f64, p: f64) -> f64 {
    if kappa0 <= 0.0 {
        return 0.0;
    }
    (((2f64).ln() + (p - 1.0) * kappa0.ln()) / p).exp()
}

/// `kappa0 = 1 - (1 - gamma) d_min`, computed without cancellation.
fn kappa0(gamma: f64, d_mu_min: f64) -> f64 {
    1.0 - (1.0 - gamma) * d_mu_min
}

/// Norm index of the certificate at `params`, without probing.
pub fn certificate_norm_index(mdp: &TabularMdp, params: &PolicyParams, cfg: &BehaviorPolicyConfig) -> Result<f64> {
    let behavior = params.behavior_policy(cfg);
    let mass = sampling_distribution(mdp, &behavior)?;
    let na = mdp.num_actions();
    let d_min = mdp
        .live_states()
        .iter()
        .flat_map(|&s| (0..na).map(move |a| s * na + a))
        .map(|k| mass[k])
        .fold(f64::INFINITY, f64::min);
    if !(d_min > 0.0) {
        return Err(Error::CertificateViolation("a live state-action pair has zero stationary mass".into()));
    }
    Ok(norm_index(kappa0(mdp.gamma(), d_min)))
}

/// Builds `A`, checks its structural properties, picks the norm, and probes
/// `||A x||_p / ||x||_p` on the all-ones vector, every basis vector, and
/// `probes` random vectors with entries uniform in `[-1, 1]`.
pub fn contraction_certificate<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    params: &PolicyParams,
    cfg: &BehaviorPolicyConfig,
    probes: usize,
    rng: &mut R,
) -> Result<ContractionCertificate> {
    let cm = contraction_matrix(mdp, params, cfg)?;
    let m = cm.pairs.len();
    let d_mu_min = cm.mass.iter().copied().fold(f64::INFINITY, f64::min);
    if !(d_mu_min > 0.0) {
        return Err(Error::CertificateViolation("a live state-action pair has zero stationary mass".into()));
    }
    let k0 = kappa0(mdp.gamma(), d_mu_min);
    let p = norm_index(k0);
    let kappa = contraction_factor(k0, p);

    let min_entry = cm.a.iter().copied().fold(f64::INFINITY, f64::min);
    let col_sums: Vec<f64> = cm.a.column_iter().map(|c| c.sum()).collect();
    let row_sums: Vec<f64> = cm.a.row_iter().map(|r| r.sum()).collect();
    let max_col_sum = col_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_row_sum = row_sums.iter().copied().fold(f64::INFINITY, f64::min);
    let max_row_sum = row_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min_entry < -STRUCTURE_TOL {
        return Err(Error::CertificateViolation(format!("negative entry {min_entry}")));
    }
    if !(max_col_sum < 2.0 + STRUCTURE_TOL) {
        return Err(Error::CertificateViolation(format!("column sum {max_col_sum} >= 2")));
    }
    if !(min_row_sum > -STRUCTURE_TOL && max_row_sum <= k0 + STRUCTURE_TOL) {
        return Err(Error::CertificateViolation(format!(
            "row sums in [{min_row_sum}, {max_row_sum}], need (0, {k0}]"
        )));
    }

    let ratio = |x: &DVector<f64>| {
        let ax = &cm.a * x;
        lp_norm(ax.as_slice(), p) / lp_norm(x.as_slice(), p)
    };
    let mut empirical_ratio_max = ratio(&DVector::from_element(m, 1.0));
    for i in 0..m {
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        empirical_ratio_max = empirical_ratio_max.max(ratio(&e));
    }
    for _ in 0..probes {
        let x = DVector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0));
        if x.amax() > 0.0 {
            empirical_ratio_max = empirical_ratio_max.max(ratio(&x));
        }
    }

    Ok(ContractionCertificate {
        p_norm: p,
        kappa0: k0,
        kappa,
        d_mu_min,
        empirical_ratio_max,
        min_entry,
        max_col_sum,
        min_row_sum,
        max_row_sum,
    })
}
