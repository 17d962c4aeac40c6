//! Run configuration in a flat `key=value` text format.
//!
//! ```text
//! # comment
//! algorithm = alg1
//! chain_n = 6
//! schedule.eps_lambda = 0.5
//! seeds = 0..4
//! ```
//!
//! Keys with a dot address nested fields (`schedule.*`, `behavior.*`,
//! `init.*`). Unknown keys, duplicate keys and malformed values are errors
//! carrying the 1-based line number.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::actor_critic::Algorithm;
use crate::error::{Error, Result};
use crate::mdp::{chain_domain, ChainSpec, TabularMdp};
use crate::policy::BehaviorPolicyConfig;
use crate::schedule::ScheduleSet;

/// Start distribution `p0'` for the stationarity diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StationarityStart {
    /// Uniform over all states.
    Uniform,
    /// The MDP's own initial distribution.
    P0,
}

impl StationarityStart {
    pub fn distribution(self, mdp: &TabularMdp) -> Vec<f64> {
        match self {
            StationarityStart::Uniform => vec![1.0 / mdp.num_states() as f64; mdp.num_states()],
            StationarityStart::P0 => mdp.initial_dist().to_vec(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            StationarityStart::Uniform => "uniform",
            StationarityStart::P0 => "p0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub chain_n: usize,
    pub gamma: f64,
    pub schedule: ScheduleSet,
    pub behavior: BehaviorPolicyConfig,
    pub total_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    pub diag_every: u64,
    pub output_path: PathBuf,
    pub init_theta: f64,
    pub init_q: f64,
    pub stationarity_start: StationarityStart,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::KlActorCritic,
            chain_n: 6,
            gamma: 0.99,
            schedule: ScheduleSet::chain_experiment(0.5),
            behavior: BehaviorPolicyConfig::default(),
            total_steps: 2_000_000,
            eval_every: 2_000,
            eval_episodes: 10,
            seeds: (0..30).collect(),
            diag_every: 20_000,
            output_path: PathBuf::from("metrics.csv"),
            init_theta: 0.0,
            init_q: 0.0,
            stationarity_start: StationarityStart::Uniform,
        }
    }
}

impl RunConfig {
    /// Parses config text on top of [`RunConfig::default`], then validates.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::config(line, format!("expected key=value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::config(line, format!("duplicate key {key:?}")));
            }
            cfg.set(key, value).map_err(|message| Error::config(line, message))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "algorithm" => {
                self.algorithm =
                    Algorithm::parse(value).ok_or_else(|| format!("algorithm must be alg1 or alg2, got {value:?}"))?
            }
            "chain_n" => self.chain_n = parse_count(key, value)? as usize,
            "gamma" => self.gamma = parse_real(key, value)?,
            "total_steps" => self.total_steps = parse_count(key, value)?,
            "eval_every" => self.eval_every = parse_count(key, value)?,
            "eval_episodes" => self.eval_episodes = parse_count(key, value)? as usize,
            "seeds" => self.seeds = parse_seeds(value)?,
            "diag_every" => self.diag_every = parse_count(key, value)?,
            "output_path" => {
                if value.is_empty() {
                    return Err("output_path must not be empty".into());
                }
                self.output_path = PathBuf::from(value)
            }
            "init.theta" => self.init_theta = parse_real(key, value)?,
            "init.q" => self.init_q = parse_real(key, value)?,
            "stationarity_start" => {
                self.stationarity_start = match value {
                    "uniform" => StationarityStart::Uniform,
                    "p0" => StationarityStart::P0,
                    _ => return Err(format!("stationarity_start must be uniform or p0, got {value:?}")),
                }
            }
            "schedule.alpha_coef" => self.schedule.alpha_coef = parse_real(key, value)?,
            "schedule.beta_coef" => self.schedule.beta_coef = parse_real(key, value)?,
            "schedule.lambda_coef" => self.schedule.lambda_coef = parse_real(key, value)?,
            "schedule.eps_alpha" => self.schedule.eps_alpha = parse_real(key, value)?,
            "schedule.eps_beta" => self.schedule.eps_beta = parse_real(key, value)?,
            "schedule.eps_lambda" => self.schedule.eps_lambda = parse_real(key, value)?,
            "schedule.t0" => self.schedule.t0 = parse_real(key, value)?,
            "behavior.epsilon" => self.behavior.epsilon = parse_real(key, value)?,
            "behavior.temperature" => self.behavior.temperature = parse_real(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Cross-field checks. The timescale inequalities are not checked here;
    /// the runner reports them as warnings.
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Err(Error::config(0, message));
        if self.chain_n < 2 {
            return bad(format!("chain_n must be at least 2, got {}", self.chain_n));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1".into());
        }
        if self.total_steps != 0 && self.total_steps < self.eval_every {
            return bad(format!(
                "total_steps = {} must be 0 or at least eval_every = {}",
                self.total_steps, self.eval_every
            ));
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be at least 1".into());
        }
        if self.diag_every == 0 {
            return bad("diag_every must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if !self.init_theta.is_finite() || !self.init_q.is_finite() {
            return bad("init.theta and init.q must be finite".into());
        }
        self.schedule.check_well_formed().or_else(|e| bad(e.to_string()))?;
        self.behavior.validate().or_else(|e| bad(e.to_string()))?;
        Ok(())
    }

    pub fn mdp(&self) -> Result<TabularMdp> {
        chain_domain(ChainSpec::new(self.chain_n, self.gamma))
    }

    /// Renders the config in the format accepted by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let s = &self.schedule;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("algorithm", self.algorithm.name().into());
        put("chain_n", self.chain_n.to_string());
        put("gamma", self.gamma.to_string());
        put("total_steps", self.total_steps.to_string());
        put("eval_every", self.eval_every.to_string());
        put("eval_episodes", self.eval_episodes.to_string());
        put("seeds", self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
        put("diag_every", self.diag_every.to_string());
        put("output_path", self.output_path.display().to_string());
        put("init.theta", self.init_theta.to_string());
        put("init.q", self.init_q.to_string());
        put("stationarity_start", self.stationarity_start.name().into());
        put("schedule.alpha_coef", s.alpha_coef.to_string());
        put("schedule.beta_coef", s.beta_coef.to_string());
        put("schedule.lambda_coef", s.lambda_coef.to_string());
        put("schedule.eps_alpha", s.eps_alpha.to_string());
        put("schedule.eps_beta", s.eps_beta.to_string());
        put("schedule.eps_lambda", s.eps_lambda.to_string());
        put("schedule.t0", s.t0.to_string());
        put("behavior.epsilon", self.behavior.epsilon.to_string());
        put("behavior.temperature", self.behavior.temperature.to_string());
        out
    }
}

fn parse_real(key: &str, value: &str) -> std::result::Result<f64, String> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("{key} expects a finite real, got {value:?}"))
}

/// Nonnegative integer; scientific notation such as `2e6` is accepted when
/// it denotes an integer.
fn parse_count(key: &str, value: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = value.parse::<u64>() {
        return Ok(v);
    }
    match value.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(63) => Ok(v as u64),
        _ => Err(format!("{key} expects a nonnegative integer, got {value:?}")),
    }
}

/// `a..b` and `a..=b` are both inclusive ranges; otherwise a comma list.
pub fn parse_seeds(value: &str) -> std::result::Result<Vec<u64>, String> {
    let value = value.trim();
    if let Some((lo, hi)) = value.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let lo = parse_count("seeds", lo.trim())?;
        let hi = parse_count("seeds", hi.trim())?;
        if hi < lo {
            return Err(format!("empty seed range {value:?}"));
        }
        return Ok((lo..=hi).collect());
    }
    let seeds = value
        .split(',')
        .map(|s| parse_count("seeds", s.trim()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut unique = HashSet::new();
    if let Some(dup) = seeds.iter().find(|s| !unique.insert(**s)) {
        return Err(format!("seed {dup} listed twice"));
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_experiment_protocol() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.total_steps, 2_000_000);
        assert_eq!(cfg.eval_every, 2_000);
        assert_eq!(cfg.eval_episodes, 10);
        assert_eq!(cfg.seeds.len(), 30);
        assert_eq!(cfg.diag_every, 20_000);
    }

    #[test]
    fn parses_nested_keys_and_comments() {
        let text = "algorithm = alg2\n# note\nschedule.eps_lambda=2 # trailing\nseeds = 3..5\ntotal_steps = 2e4\nbehavior.epsilon=0.5\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::ExpectedSoftActorCritic);
        assert_eq!(cfg.schedule.eps_lambda, 2.0);
        assert_eq!(cfg.seeds, vec![3, 4, 5]);
        assert_eq!(cfg.total_steps, 20_000);
        assert_eq!(cfg.behavior.epsilon, 0.5);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::parse("chain_n = 6\n\nschedule.eta = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }), "{err}");
    }

    #[test]
    fn rejects_bad_values() {
        for text in ["chain_n = six", "seeds = 5..2", "seeds = 1,1", "gamma = 1", "eval_every = 0", "algorithm = alg3", "x"] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
        assert!(RunConfig::parse("gamma = 0.9\ngamma = 0.8").is_err());
    }

    #[test]
    fn zero_steps_allowed() {
        assert_eq!(RunConfig::parse("total_steps = 0").unwrap().total_steps, 0);
        assert!(RunConfig::parse("total_steps = 10\neval_every = 20").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.schedule.eps_lambda = 0.03125;
        cfg.seeds = vec![7, 2, 9];
        cfg.stationarity_start = StationarityStart::P0;
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
