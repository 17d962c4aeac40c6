use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::RunConfig;
use super::run::training_rng;
use crate::actor_critic::AgentState;
use crate::error::{Error, Result};
use crate::oracle::{behavior_state_chain, contraction_certificate, mixing_estimate, ContractionCertificate, MixingEstimate};
use crate::policy::PolicyParams;

#[derive(Debug, Clone, Serialize)]
pub struct CertificateRecord {
    /// Training step at which `theta` was taken.
    pub t: u64,
    pub certificate: ContractionCertificate,
    pub mixing: MixingEstimate,
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    /// Number of checkpoints after `theta_0`, evenly spaced over training.
    pub checkpoints: u64,
    pub probes: usize,
    pub mixing_horizon: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { checkpoints: 4, probes: 200, mixing_horizon: 200 }
    }
}

pub fn certify_params(cfg: &RunConfig, params: &PolicyParams, t: u64, opts: &CertifyOptions, seed: u64) -> Result<CertificateRecord> {
    let mdp = cfg.mdp()?;
    let mut probe_rng = ChaCha8Rng::seed_from_u64(seed);
    // Stream 0 trains and streams 1.. evaluate; probes take the last one.
    probe_rng.set_stream(u64::MAX);
    let certificate = contraction_certificate(&mdp, params, &cfg.behavior, opts.probes, &mut probe_rng)?;
    let (_, chain) = behavior_state_chain(&mdp, &params.behavior_policy(&cfg.behavior))?;
    let mixing = mixing_estimate(&chain, opts.mixing_horizon)?;
    Ok(CertificateRecord { t, certificate, mixing })
}

/// Certificates at `theta_0` and at `theta` snapshots of a training run of
/// the first configured seed.
pub fn certify(cfg: &RunConfig, opts: &CertifyOptions) -> Result<Vec<CertificateRecord>> {
    cfg.validate()?;
    let seed = *cfg.seeds.first().ok_or_else(|| Error::InvalidParameter("no seeds".into()))?;
    let mdp = cfg.mdp()?;
    let proj = cfg.algorithm.projection(&mdp, &cfg.schedule);
    let mut rng = training_rng(seed);
    let mut agent = AgentState::new(&mdp, cfg.init_theta, cfg.init_q, &mut rng)?;
    let mut times: Vec<u64> = (1..=opts.checkpoints).map(|k| k * cfg.total_steps / opts.checkpoints.max(1)).collect();
    times.dedup();
    let mut records = vec![certify_params(cfg, &agent.params, 0, opts, seed)?];
    for t in times.into_iter().filter(|&t| t > 0) {
        while agent.t < t {
            cfg.algorithm.step(&mut agent, &mdp, &cfg.behavior, &cfg.schedule, &proj, &mut rng)?;
        }
        records.push(certify_params(cfg, &agent.params, t, opts, seed)?);
    }
    Ok(records)
}
