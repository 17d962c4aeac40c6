//! Three-timescale power-law step sizes `coef / (t + t0)^eps`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSet {
    pub alpha_coef: f64,
    pub beta_coef: f64,
    pub lambda_coef: f64,
    pub eps_alpha: f64,
    pub eps_beta: f64,
    pub eps_lambda: f64,
    pub t0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl ScheduleSet {
    /// The chain-experiment schedule:
    /// `alpha_t = 101 / (t + 1e5)^0.501`, `beta_t = 100 / (t + 1e5)^0.751`,
    /// `lambda_t = 0.025 / (t + 1e5)^eps_lambda`.
    pub fn chain_experiment(eps_lambda: f64) -> Self {
        Self {
            alpha_coef: 101.0,
            beta_coef: 100.0,
            lambda_coef: 0.025,
            eps_alpha: 0.501,
            eps_beta: 0.751,
            eps_lambda,
            t0: 1e5,
        }
    }

    /// Rates at step `t`.
    #[inline]
    pub fn rates(&self, t: u64) -> Rates {
        let x = t as f64 + self.t0;
        Rates {
            alpha: self.alpha_coef / x.powf(self.eps_alpha),
            beta: self.beta_coef / x.powf(self.eps_beta),
            lambda: self.lambda_coef / x.powf(self.eps_lambda),
        }
    }

    /// Basic well-formedness: positive coefficients and offset, finite
    /// nonnegative exponents. The timescale inequalities are checked by
    /// [`ScheduleSet::validate_assumptions`].
    pub fn check_well_formed(&self) -> Result<()> {
        let positive = [
            ("alpha_coef", self.alpha_coef),
            ("beta_coef", self.beta_coef),
            ("lambda_coef", self.lambda_coef),
            ("t0", self.t0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("schedule.{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("eps_alpha", self.eps_alpha), ("eps_beta", self.eps_beta), ("eps_lambda", self.eps_lambda)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("schedule.{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Checks the three-timescale and decay-speed inequalities.
    pub fn validate_assumptions(&self, mode: ValidationMode) -> ScheduleReport {
        let mut violations = Vec::new();
        let mut check = |ok: bool, v: ScheduleViolation| {
            if !ok {
                violations.push(v);
            }
        };
        use ScheduleViolation::*;
        check(self.eps_alpha > 0.5, CriticTooFast { eps_alpha: self.eps_alpha });
        check(self.eps_alpha < self.eps_beta, TimescalesNotSeparated {
            eps_alpha: self.eps_alpha,
            eps_beta: self.eps_beta,
        });
        check(self.eps_beta <= 1.0, ActorTooSlow { eps_beta: self.eps_beta });
        check(self.eps_lambda > 0.0, RegularizerNotDecaying { eps_lambda: self.eps_lambda });
        check(self.beta_coef < self.alpha_coef, CoefficientOrder {
            alpha_coef: self.alpha_coef,
            beta_coef: self.beta_coef,
        });
        check(self.lambda_coef > 0.0 && self.t0 > 0.0, NonPositiveConstant);
        let lhs = 2.0 * (1.0 - self.eps_beta);
        let rhs = (2.0 * (self.eps_beta - self.eps_alpha)).min(self.eps_alpha);
        check(lhs < rhs, DecaySpeed { lhs, rhs });
        let bound = (1.0 - self.eps_beta) / 2.0;
        check(self.eps_lambda < bound, RegularizerTooFast { eps_lambda: self.eps_lambda, bound });

        let (errors, warnings) = match mode {
            ValidationMode::Strict => (violations, Vec::new()),
            ValidationMode::Lenient => (Vec::new(), violations),
        };
        ScheduleReport { errors, warnings }
    }

    /// Window of admissible critic-rate exponents
    /// `(2 (1 - eps_beta), min{2 (eps_beta - eps_alpha), eps_alpha})`,
    /// or `None` when it is empty.
    pub fn critic_rate_window(&self) -> Option<(f64, f64)> {
        let lo = 2.0 * (1.0 - self.eps_beta);
        let hi = (2.0 * (self.eps_beta - self.eps_alpha)).min(self.eps_alpha);
        (lo < hi).then_some((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    /// Every violated inequality is an error.
    Strict,
    /// Violations are downgraded to warnings, for reproducing experiments
    /// that deliberately leave the admissible range.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleViolation {
    CriticTooFast { eps_alpha: f64 },
    TimescalesNotSeparated { eps_alpha: f64, eps_beta: f64 },
    ActorTooSlow { eps_beta: f64 },
    RegularizerNotDecaying { eps_lambda: f64 },
    CoefficientOrder { alpha_coef: f64, beta_coef: f64 },
    NonPositiveConstant,
    DecaySpeed { lhs: f64, rhs: f64 },
    RegularizerTooFast { eps_lambda: f64, bound: f64 },
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ScheduleViolation::*;
        match *self {
            CriticTooFast { eps_alpha } => write!(f, "eps_alpha = {eps_alpha} must exceed 0.5"),
            TimescalesNotSeparated { eps_alpha, eps_beta } => {
                write!(f, "eps_alpha = {eps_alpha} must be below eps_beta = {eps_beta}")
            }
            ActorTooSlow { eps_beta } => write!(f, "eps_beta = {eps_beta} must be at most 1"),
            RegularizerNotDecaying { eps_lambda } => write!(f, "eps_lambda = {eps_lambda} must be positive"),
            CoefficientOrder { alpha_coef, beta_coef } => {
                write!(f, "beta_coef = {beta_coef} must be below alpha_coef = {alpha_coef}")
            }
            NonPositiveConstant => write!(f, "lambda_coef and t0 must be positive"),
            DecaySpeed { lhs, rhs } => {
                write!(f, "2(1 - eps_beta) = {lhs} must be below min(2(eps_beta - eps_alpha), eps_alpha) = {rhs}")
            }
            RegularizerTooFast { eps_lambda, bound } => {
                write!(f, "eps_lambda = {eps_lambda} must be below (1 - eps_beta)/2 = {bound}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScheduleReport {
    pub errors: Vec<ScheduleViolation>,
    pub warnings: Vec<ScheduleViolation>,
}

impl ScheduleReport {
    pub fn passed(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }
}
