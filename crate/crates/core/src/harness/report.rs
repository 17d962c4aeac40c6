use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{MetricsRow, CSV_HEADER};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero for a single run.
    pub stderr: f64,
    pub n: usize,
}

pub fn mean_stderr(values: &[f64]) -> Option<ReturnStats> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(ReturnStats { mean, stderr, n })
}

/// Mean and standard error over seeds of the evaluation return at step `t`.
/// Seeds without an evaluation at `t` (aborted runs) are left out.
pub fn return_stats_at(rows: &[MetricsRow], t: u64) -> Option<ReturnStats> {
    let values: Vec<f64> = rows.iter().filter(|r| r.t == t).filter_map(|r| r.eval_return).collect();
    mean_stderr(&values)
}

pub fn final_return_stats(rows: &[MetricsRow], total_steps: u64) -> Option<ReturnStats> {
    return_stats_at(rows, total_steps)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    parse_metrics(&std::fs::read_to_string(path)?)
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Metrics(format!("unexpected header {other:?}"))),
    }
    lines.filter(|l| !l.is_empty()).map(MetricsRow::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    /// Last diagnostic step.
    pub final_t: u64,
    /// Mean of `grad_norm_reg^2` over rows with `t` in `[ceil(final_t/2), final_t]`.
    pub window_mean: f64,
    /// Least-squares slope of `log mean(grad_norm_reg^2)` against `log t`
    /// within the window; `None` when fewer than two positive points exist.
    pub slope: Option<f64>,
    /// `(T, window mean at T)` for every diagnostic step `T > 0`.
    pub checkpoints: Vec<(u64, f64)>,
}

impl StationarityReport {
    /// Window mean at the checkpoint `t`, if it was recorded.
    pub fn at(&self, t: u64) -> Option<f64> {
        self.checkpoints.iter().find(|(c, _)| *c == t).map(|(_, v)| *v)
    }
}

/// Squared gradient norm averaged over seeds at each diagnostic step.
fn squared_grad_by_t(rows: &[MetricsRow]) -> BTreeMap<u64, f64> {
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for r in rows {
        if let Some(g) = r.grad_norm_reg {
            let e = acc.entry(r.t).or_default();
            e.0 += g * g;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(t, (s, n))| (t, s / n as f64)).collect()
}

/// Average of `grad_norm_reg^2` over rows with `t` in `[ceil(end/2), end]`.
pub fn window_average(rows: &[MetricsRow], end: u64) -> Option<f64> {
    let lo = end.div_ceil(2);
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| (lo..=end).contains(&r.t))
        .filter_map(|r| r.grad_norm_reg.map(|g| g * g))
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

pub fn stationarity_report(rows: &[MetricsRow]) -> Result<StationarityReport> {
    let by_t = squared_grad_by_t(rows);
    if by_t.len() < 2 {
        return Err(Error::Metrics(format!(
            "need gradient norms at two or more steps, found {}",
            by_t.len()
        )));
    }
    let final_t = *by_t.keys().next_back().expect("nonempty");
    let lo = final_t.div_ceil(2);
    let points: Vec<(f64, f64)> = by_t
        .range(lo..=final_t)
        .filter(|(t, g)| **t > 0 && **g > 0.0)
        .map(|(t, g)| ((*t as f64).ln(), g.ln()))
        .collect();
    let checkpoints = by_t
        .keys()
        .filter(|&&t| t > 0)
        .filter_map(|&t| window_average(rows, t).map(|v| (t, v)))
        .collect();
    Ok(StationarityReport {
        final_t,
        window_mean: window_average(rows, final_t).expect("final step has a gradient"),
        slope: least_squares_slope(&points),
        checkpoints,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
