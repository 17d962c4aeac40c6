//! Tabular off-policy actor-critic with decaying regularization, exact
//! oracles for the quantities its analysis relies on, and an experiment
//! harness for the chain domain.

// `!(x <= tol)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actor_critic;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mdp;
pub mod oracle;
pub mod policy;
pub mod sa;
pub mod schedule;

pub use actor_critic::{
    alg1_step, alg2_step, evaluate_policy, project, sample_returns, AgentState, Algorithm, EvalMode, ProjectionConfig,
    StepRecord, THETA_LIMIT,
};
pub use error::{Error, Result};
pub use mdp::{chain_domain, sample_index, ChainSpec, TabularMdp, Violation, DOTTED, SOLID};
pub use policy::{BehaviorPolicyConfig, PolicyParams, StateGradient, StochasticPolicy};
pub use sa::{sa_step, tracking_error, ExpectedSarsa, OperatorFamily, SaState, Transition};
pub use schedule::{Rates, ScheduleReport, ScheduleSet, ScheduleViolation, ValidationMode};
