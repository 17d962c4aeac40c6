use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::report::{final_return_stats, ReturnStats};
use crate::actor_critic::{evaluate_policy, AgentState, Algorithm, EvalMode, ProjectionConfig};
use crate::error::{Error, Result};
use crate::linalg::lp_norm;
use crate::mdp::{sample_index, TabularMdp};
use crate::oracle::{
    certificate_norm_index, exact_objective_and_gradients, exact_q, exact_soft_q_for_params, objective, optimal_policy,
    Regularizer,
};
use crate::policy::{BehaviorPolicyConfig, PolicyParams};
use crate::sa::{ExpectedSarsa, Transition};
use crate::schedule::{ScheduleSet, ValidationMode};

pub const CSV_HEADER: &str =
    "seed,t,eval_return,exact_J,tracking_error_p,tracking_error_inf,grad_norm_reg,suboptimality,lambda_t";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub t: u64,
    pub eval_return: Option<f64>,
    pub exact_j: Option<f64>,
    pub tracking_error_p: Option<f64>,
    pub tracking_error_inf: Option<f64>,
    pub grad_norm_reg: Option<f64>,
    pub suboptimality: Option<f64>,
    pub lambda_t: f64,
}

fn field(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map(|v| v.to_string()).unwrap_or_default()
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.t,
            field(self.eval_return),
            field(self.exact_j),
            field(self.tracking_error_p),
            field(self.tracking_error_inf),
            field(self.grad_norm_reg),
            field(self.suboptimality),
            self.lambda_t
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(Error::Metrics(format!("expected 9 columns, got {}: {line:?}", cols.len())));
        }
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::Metrics(format!("bad number {s:?}")))
            }
        };
        let int = |s: &str| s.parse::<u64>().map_err(|_| Error::Metrics(format!("bad integer {s:?}")));
        Ok(Self {
            seed: int(cols[0])?,
            t: int(cols[1])?,
            eval_return: opt(cols[2])?,
            exact_j: opt(cols[3])?,
            tracking_error_p: opt(cols[4])?,
            tracking_error_inf: opt(cols[5])?,
            grad_norm_reg: opt(cols[6])?,
            suboptimality: opt(cols[7])?,
            lambda_t: opt(cols[8])?.ok_or_else(|| Error::Metrics("missing lambda_t".into()))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRecord {
    pub seed: u64,
    pub t: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub abort: Option<AbortRecord>,
    pub final_params: PolicyParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub chain_n: usize,
    pub gamma: f64,
    pub eps_lambda: f64,
    pub total_steps: u64,
    pub seeds: Vec<u64>,
    pub final_return: Option<ReturnStats>,
    pub optimal_return: f64,
    pub aborted: Vec<AbortRecord>,
    pub schedule_warnings: Vec<String>,
    pub metrics_path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub summary: RunSummary,
    pub outcomes: Vec<SeedOutcome>,
}

impl ExperimentResult {
    pub fn rows(&self) -> impl Iterator<Item = &MetricsRow> {
        self.outcomes.iter().flat_map(|o| o.rows.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Training rng for `seed`.
pub fn training_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Evaluation rng for the checkpoint at step `t`. It lives on its own
/// ChaCha stream, so evaluating never shifts the training stream.
pub fn evaluation_rng(seed: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t.wrapping_add(1));
    rng
}

/// Steps at which a row is written: every multiple of `eval_every` or
/// `diag_every`, plus `0` and `total_steps`.
pub fn checkpoint_times(cfg: &RunConfig) -> Vec<u64> {
    let mut times = vec![0, cfg.total_steps];
    for every in [cfg.eval_every, cfg.diag_every] {
        times.extend((1..=cfg.total_steps / every).map(|k| k * every));
    }
    times.sort_unstable();
    times.dedup();
    times
}

struct Context {
    mdp: TabularMdp,
    proj: ProjectionConfig,
    optimal_j: f64,
    stationarity_start: Vec<f64>,
}

impl Context {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let mdp = cfg.mdp()?;
        let (_, tables) = optimal_policy(&mdp)?;
        let optimal_j = objective(&tables, mdp.initial_dist());
        Ok(Self {
            proj: cfg.algorithm.projection(&mdp, &cfg.schedule),
            stationarity_start: cfg.stationarity_start.distribution(&mdp),
            optimal_j,
            mdp,
        })
    }
}

struct Diagnostics {
    exact_j: f64,
    tracking_error_p: f64,
    tracking_error_inf: f64,
    grad_norm_reg: f64,
}

fn diagnostics(cfg: &RunConfig, ctx: &Context, agent: &AgentState, lambda: f64) -> Result<Diagnostics> {
    let mdp = &ctx.mdp;
    let params = &agent.params;
    let (reg, target) = match cfg.algorithm {
        Algorithm::KlActorCritic => (Regularizer::KlUniform, exact_q(mdp, &params.target_policy())?.q),
        Algorithm::ExpectedSoftActorCritic => (Regularizer::Entropy, exact_soft_q_for_params(mdp, params, lambda)?.q_soft),
    };
    let diff: Vec<f64> = agent.critic.iter().zip(&target).map(|(q, f)| q - f).collect();
    let p = certificate_norm_index(mdp, params, &cfg.behavior)?;
    let grad = exact_objective_and_gradients(mdp, params, lambda, reg, &ctx.stationarity_start)?;
    let exact_j = objective(&exact_q(mdp, &params.target_policy())?, mdp.initial_dist());
    Ok(Diagnostics {
        exact_j,
        tracking_error_p: lp_norm(&diff, p),
        tracking_error_inf: lp_norm(&diff, f64::INFINITY),
        grad_norm_reg: grad.grad_norm(),
    })
}

fn checkpoint_row(cfg: &RunConfig, ctx: &Context, agent: &AgentState, seed: u64) -> Result<MetricsRow> {
    let t = agent.t;
    let lambda = cfg.schedule.rates(t).lambda;
    let eval_return = if t.is_multiple_of(cfg.eval_every) || t == cfg.total_steps {
        let mut rng = evaluation_rng(seed, t);
        Some(evaluate_policy(&ctx.mdp, &agent.params, cfg.eval_episodes, &mut rng, EvalMode::Sampled)?)
    } else {
        None
    };
    let mut row = MetricsRow {
        seed,
        t,
        eval_return,
        exact_j: None,
        tracking_error_p: None,
        tracking_error_inf: None,
        grad_norm_reg: None,
        suboptimality: None,
        lambda_t: lambda,
    };
    if t.is_multiple_of(cfg.diag_every) || t == cfg.total_steps {
        match diagnostics(cfg, ctx, agent, lambda) {
            Ok(d) => {
                row.exact_j = Some(d.exact_j);
                row.tracking_error_p = Some(d.tracking_error_p);
                row.tracking_error_inf = Some(d.tracking_error_inf);
                row.grad_norm_reg = Some(d.grad_norm_reg);
                row.suboptimality = Some(ctx.optimal_j - d.exact_j);
            }
            Err(e) => log::warn!("seed {seed}, t {t}: diagnostics unavailable: {e}"),
        }
    }
    Ok(row)
}

fn run_seed(cfg: &RunConfig, ctx: &Context, seed: u64) -> Result<SeedOutcome> {
    let mut rng = training_rng(seed);
    let mut agent = AgentState::new(&ctx.mdp, cfg.init_theta, cfg.init_q, &mut rng)?;
    let mut rows = Vec::new();
    let mut abort = None;
    'outer: for &checkpoint in &checkpoint_times(cfg) {
        while agent.t < checkpoint {
            let t = agent.t;
            if let Err(e) = cfg.algorithm.step(&mut agent, &ctx.mdp, &cfg.behavior, &cfg.schedule, &ctx.proj, &mut rng) {
                let t = if let Error::Diverged { t, .. } = e { t } else { t };
                log::warn!("seed {seed} aborted at t {t}: {e}");
                abort = Some(AbortRecord { seed, t, reason: e.to_string() });
                break 'outer;
            }
        }
        rows.push(checkpoint_row(cfg, ctx, &agent, seed)?);
    }
    Ok(SeedOutcome { seed, rows, abort, final_params: agent.params })
}

/// Trains every seed, writes the metrics CSV to `cfg.output_path` and the
/// summary JSON next to it, and returns both in memory.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResult> {
    run_experiment_with(cfg, Execution::Parallel)
}

pub fn run_experiment_with(cfg: &RunConfig, execution: Execution) -> Result<ExperimentResult> {
    let result = simulate(cfg, execution)?;
    write_metrics(&cfg.output_path, result.rows())?;
    let summary_path = summary_path(&cfg.output_path);
    std::fs::write(&summary_path, serde_json::to_string_pretty(&result.summary)?)?;
    Ok(result)
}

/// [`run_experiment_with`] without touching the filesystem.
pub fn simulate(cfg: &RunConfig, execution: Execution) -> Result<ExperimentResult> {
    cfg.validate()?;
    let schedule_warnings: Vec<String> = cfg
        .schedule
        .validate_assumptions(ValidationMode::Lenient)
        .warnings
        .iter()
        .map(ToString::to_string)
        .collect();
    for w in &schedule_warnings {
        log::warn!("schedule: {w}");
    }
    let ctx = Context::new(cfg)?;
    let outcomes: Vec<SeedOutcome> = match execution {
        Execution::Serial => cfg.seeds.iter().map(|&s| run_seed(cfg, &ctx, s)).collect::<Result<_>>()?,
        Execution::Parallel => cfg.seeds.par_iter().map(|&s| run_seed(cfg, &ctx, s)).collect::<Result<_>>()?,
    };
    let rows: Vec<MetricsRow> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    let summary = RunSummary {
        algorithm: cfg.algorithm.name().into(),
        chain_n: cfg.chain_n,
        gamma: cfg.gamma,
        eps_lambda: cfg.schedule.eps_lambda,
        total_steps: cfg.total_steps,
        seeds: cfg.seeds.clone(),
        final_return: final_return_stats(&rows, cfg.total_steps),
        optimal_return: ctx.optimal_j,
        aborted: outcomes.iter().filter_map(|o| o.abort.clone()).collect(),
        schedule_warnings,
        metrics_path: cfg.output_path.clone(),
    };
    Ok(ExperimentResult { summary, outcomes })
}

/// `metrics.csv` -> `metrics.summary.json`.
pub fn summary_path(metrics: &Path) -> PathBuf {
    metrics.with_extension("summary.json")
}

pub fn write_metrics<'a>(path: &Path, rows: impl IntoIterator<Item = &'a MetricsRow>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    out.flush()?;
    Ok(())
}

/// Critic-only run at a frozen `params`: samples from the behavior process
/// and applies the expected-SARSA update with rate `alpha_t`. Returns
/// `(t, ||q_t - q_pi||_inf)` at each requested checkpoint.
pub fn critic_tracking(
    mdp: &TabularMdp,
    params: &PolicyParams,
    behavior: &BehaviorPolicyConfig,
    schedule: &ScheduleSet,
    checkpoints: &[u64],
    seed: u64,
) -> Result<Vec<(u64, f64)>> {
    let target = exact_q(mdp, &params.target_policy())?.q;
    let family = ExpectedSarsa::new(mdp);
    let mut rng = training_rng(seed);
    let mut q = vec![0.0; mdp.num_pairs()];
    let mut s = first_live_state(mdp, &mut rng)?;
    let mus: Vec<Vec<f64>> = (0..mdp.num_states()).map(|s| params.mu(behavior, s)).collect();
    let mut t = 0u64;
    let mut out = Vec::with_capacity(checkpoints.len());
    for &checkpoint in checkpoints {
        while t < checkpoint {
            let a = sample_index(&mus[s], &mut rng);
            let (reward, next) = mdp.step_unchecked(s, a, &mut rng);
            let y = Transition { state: s, action: a, next_state: next };
            let delta = family.td_error(params, &q, &y, reward);
            q[mdp.pair(s, a)] += schedule.rates(t).alpha * delta;
            s = if mdp.is_absorbing(next) { first_live_state(mdp, &mut rng)? } else { next };
            t += 1;
        }
        let diff: Vec<f64> = q.iter().zip(&target).map(|(a, b)| a - b).collect();
        out.push((t, lp_norm(&diff, f64::INFINITY)));
    }
    Ok(out)
}

fn first_live_state(mdp: &TabularMdp, rng: &mut ChaCha8Rng) -> Result<usize> {
    (0..10_000)
        .map(|_| mdp.sample_initial(rng))
        .find(|&s| !mdp.is_absorbing(s))
        .ok_or_else(|| Error::InvalidMdp("initial distribution keeps drawing absorbing states".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(total_steps: u64) -> RunConfig {
        RunConfig {
            total_steps,
            eval_every: 500,
            diag_every: 1_000,
            seeds: vec![0, 1, 2],
            ..RunConfig::default()
        }
    }

    #[test]
    fn checkpoint_grid() {
        let cfg = RunConfig { total_steps: 2_500, eval_every: 1_000, diag_every: 750, ..RunConfig::default() };
        assert_eq!(checkpoint_times(&cfg), vec![0, 750, 1_000, 1_500, 2_000, 2_250, 2_500]);
        let cfg = RunConfig { total_steps: 0, ..RunConfig::default() };
        assert_eq!(checkpoint_times(&cfg), vec![0]);
    }

    #[test]
    fn zero_steps_gives_one_row_per_seed() {
        let result = simulate(&small(0), Execution::Serial).unwrap();
        let rows: Vec<_> = result.rows().collect();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.t == 0 && r.eval_return.is_some() && r.exact_j.is_some()));
        // Uniform policy on the chain, exactly.
        let j = rows[0].exact_j.unwrap();
        assert!(rows[0].suboptimality.unwrap() > 0.0 && j > 0.0);
    }

    #[test]
    fn row_round_trip_and_empty_fields() {
        let row = MetricsRow {
            seed: 4,
            t: 2000,
            eval_return: Some(0.5),
            exact_j: None,
            tracking_error_p: None,
            tracking_error_inf: Some(f64::NAN),
            grad_norm_reg: None,
            suboptimality: None,
            lambda_t: 1e-5,
        };
        let line = row.to_csv();
        assert_eq!(line, "4,2000,0.5,,,,,,0.00001");
        let back = MetricsRow::parse(&line).unwrap();
        assert_eq!(back.tracking_error_inf, None);
        assert_eq!(back.eval_return, Some(0.5));
    }

    #[test]
    fn serial_equals_parallel() {
        let cfg = small(3_000);
        let a = simulate(&cfg, Execution::Serial).unwrap();
        let b = simulate(&cfg, Execution::Parallel).unwrap();
        let lines = |r: &ExperimentResult| r.rows().map(MetricsRow::to_csv).collect::<Vec<_>>();
        assert_eq!(lines(&a), lines(&b));
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn evaluation_stream_is_independent_of_training() {
        let base = small(2_000);
        let sparse = RunConfig { eval_every: 2_000, diag_every: 2_000, ..base.clone() };
        let a = simulate(&base, Execution::Serial).unwrap();
        let b = simulate(&sparse, Execution::Serial).unwrap();
        assert_eq!(a.outcomes[0].final_params, b.outcomes[0].final_params);
    }

    #[test]
    fn tracking_with_frozen_uniform_policy_converges() {
        let cfg = RunConfig::default();
        let mdp = cfg.mdp().unwrap();
        let params = PolicyParams::zeros(mdp.num_states(), 2);
        let errs = critic_tracking(&mdp, &params, &cfg.behavior, &cfg.schedule, &[1_000, 50_000], 0).unwrap();
        assert!(errs[1].1 < errs[0].1);
    }
}
