use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::report::ReturnStats;
use super::run::{run_experiment_with, Execution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps_lambda: f64,
    pub final_return: Option<ReturnStats>,
    pub aborted: usize,
    pub metrics_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub algorithm: String,
    /// Sorted by `eps_lambda`, ascending.
    pub rows: Vec<SweepRow>,
    /// `max - min` of the final mean returns across `eps_lambda`.
    pub spread: Option<f64>,
}

impl SweepResult {
    pub fn to_table(&self) -> String {
        let mut out = String::from("eps_lambda,final_return_mean,final_return_stderr,runs,aborted\n");
        for r in &self.rows {
            let (m, s, n) = r.final_return.map_or((String::new(), String::new(), 0), |st| {
                (st.mean.to_string(), st.stderr.to_string(), st.n)
            });
            out.push_str(&format!("{},{m},{s},{n},{}\n", r.eps_lambda, r.aborted));
        }
        out
    }
}

/// `runs/metrics.csv` with `eps_lambda = 0.5` -> `runs/metrics_eps_lambda_0.5.csv`.
pub fn sweep_metrics_path(base: &Path, eps_lambda: f64) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_eps_lambda_{eps_lambda}.{ext}"))
}

/// Runs `base` once per `eps_lambda` value, each writing its own metrics and
/// summary files, then writes the comparison table next to them.
pub fn sweep(base: &RunConfig, eps_lambda_values: &[f64], execution: Execution) -> Result<SweepResult> {
    if eps_lambda_values.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one eps_lambda value".into()));
    }
    let mut values = eps_lambda_values.to_vec();
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidParameter(format!("eps_lambda must be finite and nonnegative, got {bad}")));
    }
    values.sort_by(f64::total_cmp);
    values.dedup();

    let mut rows = Vec::with_capacity(values.len());
    for eps_lambda in values {
        let mut cfg = base.clone();
        cfg.schedule.eps_lambda = eps_lambda;
        cfg.output_path = sweep_metrics_path(&base.output_path, eps_lambda);
        log::info!("sweep: eps_lambda = {eps_lambda}");
        let result = run_experiment_with(&cfg, execution)?;
        rows.push(SweepRow {
            eps_lambda,
            final_return: result.summary.final_return,
            aborted: result.summary.aborted.len(),
            metrics_path: cfg.output_path,
        });
    }
    let means: Vec<f64> = rows.iter().filter_map(|r| r.final_return.map(|s| s.mean)).collect();
    let spread = (!means.is_empty()).then(|| {
        let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = means.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    });
    let result = SweepResult { algorithm: base.algorithm.name().into(), rows, spread };
    std::fs::write(base.output_path.with_extension("sweep.csv"), result.to_table())?;
    Ok(result)
}
