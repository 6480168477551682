//! Tabular actor-critic with a softmax policy over action preferences.
//!
//! One learning step computes the TD error with the pre-update value table,
//! moves the critic by `alpha * delta`, and moves the actor along
//! `beta * advantage * grad log pi(a|s)`, where the advantage is the TD
//! error unless a feedback signal replaces it.

mod snapshot;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ActionId, StateId};

pub use snapshot::{parse_snapshots, write_snapshots, SnapshotError, TableSnapshot};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("state {0} is not in the table")]
    UnknownState(StateId),
    #[error("action {0} is not in the table")]
    UnknownAction(ActionId),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, LearnError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Critic step size.
    pub alpha: f64,
    /// Actor step size.
    pub beta: f64,
    pub gamma: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            alpha: 0.1,
            beta: 0.1,
            gamma: 0.95,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(LearnError::InvalidHyper(format!("alpha = {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(LearnError::InvalidHyper(format!("beta = {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(LearnError::InvalidHyper(format!("gamma = {}", self.gamma)));
        }
        Ok(())
    }
}

/// Numerically stable softmax.
pub fn softmax(preferences: &[f64]) -> Vec<f64> {
    let max = preferences
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = preferences.iter().map(|p| (p - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Preference table `theta[s, a]`; the policy is the softmax over a row.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    n_states: usize,
    n_actions: usize,
    theta: Vec<f64>,
}

impl PolicyParams {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        PolicyParams {
            n_states,
            n_actions,
            theta: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_table(n_states: usize, n_actions: usize, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != n_states * n_actions {
            return Err(LearnError::InvalidHyper(format!(
                "table has {} entries, expected {}",
                theta.len(),
                n_states * n_actions
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(LearnError::NonFinite("preference"));
        }
        Ok(PolicyParams {
            n_states,
            n_actions,
            theta,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn table(&self) -> &[f64] {
        &self.theta
    }

    fn row_range(&self, s: StateId) -> Result<std::ops::Range<usize>> {
        if s.0 >= self.n_states {
            return Err(LearnError::UnknownState(s));
        }
        Ok(s.0 * self.n_actions..(s.0 + 1) * self.n_actions)
    }

    pub fn preferences(&self, s: StateId) -> Result<&[f64]> {
        Ok(&self.theta[self.row_range(s)?])
    }

    pub fn preferences_mut(&mut self, s: StateId) -> Result<&mut [f64]> {
        let range = self.row_range(s)?;
        Ok(&mut self.theta[range])
    }

    /// `pi(. | s)`.
    pub fn action_probs(&self, s: StateId) -> Result<Vec<f64>> {
        Ok(softmax(self.preferences(s)?))
    }

    /// Gradient of `log pi(a|s)` with respect to the preferences at `s`:
    /// `1{a' = a} - pi(a'|s)` for each action `a'`. Zero for other states.
    pub fn grad_log_policy(&self, s: StateId, a: ActionId) -> Result<Vec<f64>> {
        if a.0 >= self.n_actions {
            return Err(LearnError::UnknownAction(a));
        }
        let mut grad = self.action_probs(s)?;
        for g in grad.iter_mut() {
            *g = -*g;
        }
        grad[a.0] += 1.0;
        Ok(grad)
    }

    /// `theta[s, .] += beta * advantage * grad log pi(a|s)`.
    pub fn update_policy(
        &mut self,
        s: StateId,
        a: ActionId,
        advantage: f64,
        beta: f64,
    ) -> Result<()> {
        if !advantage.is_finite() {
            return Err(LearnError::NonFinite("advantage"));
        }
        let grad = self.grad_log_policy(s, a)?;
        for (t, g) in self.preferences_mut(s)?.iter_mut().zip(grad) {
            *t += beta * advantage * g;
        }
        Ok(())
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, s: StateId, rng: &mut R) -> Result<ActionId> {
        let probs = self.action_probs(s)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(ActionId(i));
            }
        }
        Ok(ActionId(probs.len() - 1))
    }
}

/// State-value table.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueParams {
    v: Vec<f64>,
}

impl ValueParams {
    pub fn new(n_states: usize) -> Self {
        ValueParams {
            v: vec![0.0; n_states],
        }
    }

    pub fn from_table(v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(LearnError::NonFinite("value"));
        }
        Ok(ValueParams { v })
    }

    pub fn table(&self) -> &[f64] {
        &self.v
    }

    pub fn value(&self, s: StateId) -> Result<f64> {
        self.v.get(s.0).copied().ok_or(LearnError::UnknownState(s))
    }

    /// `v[s] += alpha * delta`; the tabular gradient is the indicator of `s`.
    pub fn update_value(&mut self, s: StateId, delta: f64, alpha: f64) -> Result<()> {
        let slot = self.v.get_mut(s.0).ok_or(LearnError::UnknownState(s))?;
        *slot += alpha * delta;
        Ok(())
    }
}

/// One environment transition `<s, a, r, s'>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionSample {
    pub s: StateId,
    pub a: ActionId,
    pub r: f64,
    pub s_next: StateId,
    pub terminal: bool,
}

/// `r + gamma * V(s') - V(s)`, without the bootstrap term on terminal steps.
pub fn td_error(sample: &TransitionSample, value: &ValueParams, gamma: f64) -> Result<f64> {
    let bootstrap = if sample.terminal {
        0.0
    } else {
        gamma * value.value(sample.s_next)?
    };
    Ok(sample.r + bootstrap - value.value(sample.s)?)
}

/// Which signal drove a policy update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageSource {
    TdError,
    Feedback,
}

impl AdvantageSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AdvantageSource::TdError => "td",
            AdvantageSource::Feedback => "feedback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    pub delta: f64,
    pub advantage: f64,
    pub source: AdvantageSource,
}

/// A single actor-critic update for one executed transition.
///
/// The critic always learns from the TD error. The actor uses `feedback`
/// in place of the TD error when it is present.
pub fn learn_step(
    policy: &mut PolicyParams,
    value: &mut ValueParams,
    sample: &TransitionSample,
    feedback: Option<f64>,
    hyper: &HyperParams,
) -> Result<UpdateRecord> {
    let delta = td_error(sample, value, hyper.gamma)?;
    value.update_value(sample.s, delta, hyper.alpha)?;
    let (advantage, source) = match feedback {
        Some(f) => (f, AdvantageSource::Feedback),
        None => (delta, AdvantageSource::TdError),
    };
    policy.update_policy(sample.s, sample.a, advantage, hyper.beta)?;
    Ok(UpdateRecord {
        delta,
        advantage,
        source,
    })
}

#[cfg(test)]
mod tests;
