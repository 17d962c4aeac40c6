//! Generic stochastic-approximation iterate
//! `w <- w + alpha_t (F_control(w, y) - w + noise)`
//! and the expected-SARSA operator families that drive the critics.

use crate::error::{Error, Result};
use crate::linalg::lp_norm;
use crate::mdp::TabularMdp;
use crate::oracle::{exact_q, exact_soft_q_for_params};
use crate::policy::{log_softmax_into, softmax_into, PolicyParams};

/// An operator `F_control(w, y)` with an optional exact fixed point.
pub trait OperatorFamily {
    type Control: ?Sized;
    type Observation;

    fn dim(&self) -> usize;

    /// Deterministic given `(control, w, y)`.
    fn apply(&self, control: &Self::Control, w: &[f64], y: &Self::Observation) -> Result<Vec<f64>>;

    /// Fixed point of the expected operator under `control`, if known.
    fn fixed_point(&self, control: &Self::Control) -> Option<Result<Vec<f64>>> {
        let _ = control;
        None
    }
}

const STACK_ACTIONS: usize = 16;

/// A transition `(S_t, A_t, S_{t+1})`, with `S_{t+1}` taken before any reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaState {
    pub w: Vec<f64>,
    pub t: u64,
    pub tracking_log: Option<Vec<(u64, f64)>>,
}

impl SaState {
    pub fn new(w: Vec<f64>) -> Self {
        Self { w, t: 0, tracking_log: None }
    }

    pub fn with_tracking(mut self) -> Self {
        self.tracking_log = Some(Vec::new());
        self
    }

    /// Appends `(t, error)` when tracking is enabled.
    pub fn record(&mut self, error: f64) {
        if let Some(log) = self.tracking_log.as_mut() {
            log.push((self.t, error));
        }
    }
}

/// One iterate update. `noise = None` means `epsilon_t = 0`.
pub fn sa_step<F: OperatorFamily>(
    state: &mut SaState,
    family: &F,
    control: &F::Control,
    y: &F::Observation,
    alpha: f64,
    noise: Option<&[f64]>,
) -> Result<()> {
    let dim = family.dim();
    if state.w.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: state.w.len() });
    }
    if let Some(n) = noise {
        if n.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: n.len() });
        }
    }
    let target = family.apply(control, &state.w, y)?;
    for (i, (w, f)) in state.w.iter_mut().zip(&target).enumerate() {
        let e = noise.map_or(0.0, |n| n[i]);
        *w += alpha * (f - *w + e);
    }
    state.t += 1;
    Ok(())
}

/// `|| w - w*_control ||_p`.
pub fn tracking_error<F: OperatorFamily>(state: &SaState, family: &F, control: &F::Control, norm_p: f64) -> Result<f64> {
    let target = family.fixed_point(control).ok_or(Error::OracleUnavailable)??;
    let diff: Vec<f64> = state.w.iter().zip(&target).map(|(a, b)| a - b).collect();
    Ok(lp_norm(&diff, norm_p))
}

/// Off-policy expected SARSA with the softmax target policy, optionally
/// with the soft (entropy-bonus) bootstrap.
///
/// `F_theta(q, (s0, a0, s1)) = q + e_{(s0,a0)} delta`, with
/// `delta = r(s0,a0) + gamma sum_a1 pi(a1|s1) (q(s1,a1) - eta log pi(a1|s1)) - q(s0,a0)`.
#[derive(Debug, Clone, Copy)]
pub struct ExpectedSarsa<'a> {
    mdp: &'a TabularMdp,
    eta: f64,
}

impl<'a> ExpectedSarsa<'a> {
    pub fn new(mdp: &'a TabularMdp) -> Self {
        Self { mdp, eta: 0.0 }
    }

    pub fn soft(mdp: &'a TabularMdp, eta: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be a finite nonnegative real, got {eta}")));
        }
        Ok(Self { mdp, eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Target-policy expectation of the bootstrap at `state`.
    #[inline]
    pub fn bootstrap(&self, params: &PolicyParams, q: &[f64], state: usize) -> f64 {
        let na = self.mdp.num_actions();
        let logits = params.logits(state);
        let row = &q[state * na..(state + 1) * na];
        if na <= STACK_ACTIONS {
            let mut scratch = [0.0; 2 * STACK_ACTIONS];
            self.expected_value(logits, row, &mut scratch[..2 * na])
        } else {
            self.expected_value(logits, row, &mut vec![0.0; 2 * na])
        }
    }

    #[inline]
    fn expected_value(&self, logits: &[f64], row: &[f64], scratch: &mut [f64]) -> f64 {
        let (pi, log_pi) = scratch.split_at_mut(row.len());
        softmax_into(logits, 1.0, pi);
        let plain: f64 = pi.iter().zip(row).map(|(p, q)| p * q).sum();
        if self.eta == 0.0 {
            return plain;
        }
        log_softmax_into(logits, log_pi);
        plain - self.eta * pi.iter().zip(log_pi.iter()).map(|(p, l)| p * l).sum::<f64>()
    }

    /// `delta` for transition `y` at critic `q` and the given reward.
    #[inline]
    pub fn td_error(&self, params: &PolicyParams, q: &[f64], y: &Transition, reward: f64) -> f64 {
        let k = self.mdp.pair(y.state, y.action);
        reward + self.mdp.gamma() * self.bootstrap(params, q, y.next_state) - q[k]
    }

    fn check(&self, y: &Transition) -> Result<()> {
        self.mdp.check_state(y.state)?;
        self.mdp.check_action(y.action)?;
        self.mdp.check_state(y.next_state)
    }
}

impl OperatorFamily for ExpectedSarsa<'_> {
    type Control = PolicyParams;
    type Observation = Transition;

    fn dim(&self) -> usize {
        self.mdp.num_pairs()
    }

    fn apply(&self, params: &PolicyParams, q: &[f64], y: &Transition) -> Result<Vec<f64>> {
        self.check(y)?;
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: q.len() });
        }
        let delta = self.td_error(params, q, y, self.mdp.reward(y.state, y.action));
        let mut out = q.to_vec();
        out[self.mdp.pair(y.state, y.action)] += delta;
        Ok(out)
    }

    fn fixed_point(&self, params: &PolicyParams) -> Option<Result<Vec<f64>>> {
        Some(if self.eta == 0.0 {
            exact_q(self.mdp, &params.target_policy()).map(|t| t.q)
        } else {
            exact_soft_q_for_params(self.mdp, params, self.eta).map(|t| t.q_soft)
        })
    }
}
