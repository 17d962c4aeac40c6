use nalgebra::DMatrix;
use serde::Serialize;

use super::stationary::stationary_distribution;
use crate::error::{Error, Result};

/// Only steps `n >= FIT_MIN_STEP` enter the rate fit.
pub const FIT_MIN_STEP: usize = 5;
/// Distances at or below this are treated as converged and not fitted.
pub const FIT_FLOOR: f64 = 1e-12;

/// Geometric envelope `tv(n) <= c0 * tau^n` of the distance to stationarity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingEstimate {
    /// `tv_curve[n] = max_y || P^n(y, .) - d ||_1` for `n = 0..=horizon`.
    pub tv_curve: Vec<f64>,
    pub tau: f64,
    pub c0: f64,
}

impl MixingEstimate {
    /// Whether `tv(n) <= c0 tau^n` holds at every recorded step above the floor.
    pub fn is_envelope(&self) -> bool {
        self.tv_curve
            .iter()
            .enumerate()
            .filter(|(_, &tv)| tv > FIT_FLOOR)
            .all(|(k, &tv)| tv <= self.c0 * self.tau.powi(k as i32) * (1.0 + 1e-12))
    }

    /// Smallest `n >= 0` with `c0 * tau^n <= alpha`.
    pub fn tau_alpha(&self, alpha: f64) -> usize {
        if self.c0 <= alpha {
            return 0;
        }
        let n = ((alpha / self.c0).ln() / self.tau.ln()).ceil().max(0.0) as usize;
        // Guard the ceiling against rounding on either side.
        let mut n = n.saturating_sub(1);
        while self.c0 * self.tau.powi(n as i32) > alpha {
            n += 1;
        }
        n
    }
}

/// Measures `sup_y || P^n(y, .) - d ||_1` and fits `c0 tau^n` to it.
///
/// `tau` is the least-squares slope of `ln tv(n)` on the tail `n >= 5`
/// (falling back to every positive step when the tail has already hit the
/// floor); `c0` is then the smallest prefactor that makes the fit an envelope
/// over every recorded step above the floor. Distances at the floor are
/// round-off of an already mixed chain.
pub fn mixing_estimate(chain: &DMatrix<f64>, horizon: usize) -> Result<MixingEstimate> {
    let d = stationary_distribution(chain)?;
    let n = chain.nrows();
    let distance = |m: &DMatrix<f64>| {
        (0..n)
            .map(|y| (0..n).map(|j| (m[(y, j)] - d[j]).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut power = DMatrix::identity(n, n);
    let mut tv_curve = Vec::with_capacity(horizon + 1);
    tv_curve.push(distance(&power));
    for _ in 0..horizon {
        power = &power * chain;
        tv_curve.push(distance(&power));
    }

    let fit_points = |min_step: usize| -> Vec<(f64, f64)> {
        tv_curve
            .iter()
            .enumerate()
            .skip(min_step)
            .filter(|(_, &tv)| tv > FIT_FLOOR)
            .map(|(k, &tv)| (k as f64, tv.ln()))
            .collect()
    };
    let mut points = fit_points(FIT_MIN_STEP);
    if points.len() < 2 {
        points = fit_points(1);
    }
    let tau = match points.len() {
        0 => FIT_FLOOR,
        1 => (points[0].1 / points[0].0).exp().max(FIT_FLOOR),
        _ => least_squares_slope(&points).exp().max(FIT_FLOOR),
    };
    if !(tau < 1.0) {
        return Err(Error::NonErgodic(format!(
            "distance to stationarity does not decay geometrically (fitted rate {tau})"
        )));
    }
    let c0 = tv_curve
        .iter()
        .enumerate()
        .filter(|(_, &tv)| tv > FIT_FLOOR)
        .map(|(k, &tv)| tv / tau.powi(k as i32))
        .fold(f64::MIN_POSITIVE, f64::max);
    Ok(MixingEstimate { tv_curve, tau, c0 })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}
