//! Comparison learners: actor-critic with feedback but no planner, and two
//! feedback-shaped tabular Q-learners.
//!
//! The shaping learners are reconstructions. TAMER+RL shapes the reward
//! with a learned model of the trainer, `r + w * H(s,a)`; BQL shaping adds
//! the raw feedback, `r + w * f`. Both sit on an epsilon-greedy Q-learning
//! core.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::actor_critic::{
    learn_step, AdvantageSource, HyperParams, LearnError, PolicyParams, TableSnapshot,
    TransitionSample, ValueParams,
};
use crate::envs::{EnvError, Environment};
use crate::feedback::{FeedbackError, FeedbackSource};
use crate::ids::{ActionId, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QParams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl Default for QParams {
    fn default() -> Self {
        QParams {
            alpha: 0.1,
            gamma: 0.95,
            epsilon: 0.1,
        }
    }
}

impl QParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(LearnError::InvalidHyper(format!(
                "q alpha = {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(LearnError::InvalidHyper(format!(
                "q gamma = {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(LearnError::InvalidHyper(format!(
                "epsilon = {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapingWeights {
    pub w_tamer: f64,
    pub w_bql: f64,
    pub tamer_lr: f64,
}

impl Default for ShapingWeights {
    fn default() -> Self {
        ShapingWeights {
            w_tamer: 1.0,
            w_bql: 1.0,
            tamer_lr: 0.2,
        }
    }
}

impl ShapingWeights {
    pub fn validate(&self) -> Result<(), LearnError> {
        for (name, v) in [
            ("w_tamer", self.w_tamer),
            ("w_bql", self.w_bql),
            ("tamer_lr", self.tamer_lr),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(LearnError::InvalidHyper(format!("{name} = {v}")));
            }
        }
        if self.tamer_lr > 1.0 {
            return Err(LearnError::InvalidHyper(format!(
                "tamer_lr = {}",
                self.tamer_lr
            )));
        }
        Ok(())
    }
}

/// Tabular `Q(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_actions: usize,
    q: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        QTable {
            n_actions,
            q: vec![0.0; n_states * n_actions],
        }
    }

    pub fn table(&self) -> &[f64] {
        &self.q
    }

    fn row(&self, s: StateId) -> Result<&[f64], LearnError> {
        self.q
            .get(s.0 * self.n_actions..(s.0 + 1) * self.n_actions)
            .ok_or(LearnError::UnknownState(s))
    }

    pub fn get(&self, s: StateId, a: ActionId) -> Result<f64, LearnError> {
        self.row(s)?
            .get(a.0)
            .copied()
            .ok_or(LearnError::UnknownAction(a))
    }

    pub fn max(&self, s: StateId) -> Result<f64, LearnError> {
        Ok(self
            .row(s)?
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// All actions attaining the maximum.
    pub fn greedy(&self, s: StateId) -> Result<Vec<ActionId>, LearnError> {
        let row = self.row(s)?;
        let best = self.max(s)?;
        Ok((0..row.len())
            .filter(|&a| row[a] == best)
            .map(ActionId)
            .collect())
    }

    /// Epsilon-greedy with uniform tie-breaking. Always draws exactly two
    /// uniforms.
    pub fn epsilon_greedy<R: Rng + ?Sized>(
        &self,
        s: StateId,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<ActionId, LearnError> {
        let explore: f64 = rng.random();
        let pick: f64 = rng.random();
        let candidates = if explore < epsilon {
            (0..self.n_actions).map(ActionId).collect()
        } else {
            self.greedy(s)?
        };
        let i = ((pick * candidates.len() as f64) as usize).min(candidates.len() - 1);
        Ok(candidates[i])
    }

    /// One Q-learning backup with reward `r`; returns the TD error.
    pub fn update(
        &mut self,
        sample: &TransitionSample,
        r: f64,
        params: &QParams,
    ) -> Result<f64, LearnError> {
        let target = if sample.terminal {
            r
        } else {
            r + params.gamma * self.max(sample.s_next)?
        };
        let current = self.get(sample.s, sample.a)?;
        let delta = target - current;
        if !delta.is_finite() {
            return Err(LearnError::NonFinite("q target"));
        }
        self.q[sample.s.0 * self.n_actions + sample.a.0] += params.alpha * delta;
        Ok(delta)
    }
}

/// Learned trainer model `H(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanModel {
    h: QTable,
}

impl HumanModel {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        HumanModel {
            h: QTable::new(n_states, n_actions),
        }
    }

    pub fn get(&self, s: StateId, a: ActionId) -> Result<f64, LearnError> {
        self.h.get(s, a)
    }

    pub fn table(&self) -> &[f64] {
        self.h.table()
    }

    /// `H(s,a) += lr * (f - H(s,a))`.
    pub fn update(&mut self, s: StateId, a: ActionId, f: f64, lr: f64) -> Result<(), LearnError> {
        let h = self.get(s, a)?;
        self.h.q[s.0 * self.h.n_actions + a.0] = h + lr * (f - h);
        Ok(())
    }
}

/// AC with human feedback: the actor-critic update, with actions drawn from
/// the policy at every environment step.
pub fn ac_hf_step(
    policy: &mut PolicyParams,
    value: &mut ValueParams,
    sample: &TransitionSample,
    feedback: Option<f64>,
    hyper: &HyperParams,
) -> Result<StepRecord, LearnError> {
    let record = learn_step(policy, value, sample, feedback, hyper)?;
    Ok(StepRecord {
        delta: record.delta,
        source: record.source,
    })
}

/// TAMER+RL reward shaping. Feedback first trains `H`; Q-learning then
/// backs up `r + w_tamer * H(s,a)`.
pub fn tamer_rl_step(
    q: &mut QTable,
    human: &mut HumanModel,
    sample: &TransitionSample,
    feedback: Option<f64>,
    weights: &ShapingWeights,
    params: &QParams,
) -> Result<StepRecord, LearnError> {
    if let Some(f) = feedback {
        human.update(sample.s, sample.a, f, weights.tamer_lr)?;
    }
    let shaped = sample.r + weights.w_tamer * human.get(sample.s, sample.a)?;
    Ok(StepRecord {
        delta: q.update(sample, shaped, params)?,
        source: source_of(feedback),
    })
}

/// BQL reward shaping: Q-learning on `r + w_bql * f`, or `r` without
/// feedback.
pub fn bql_shaping_step(
    q: &mut QTable,
    sample: &TransitionSample,
    feedback: Option<f64>,
    weights: &ShapingWeights,
    params: &QParams,
) -> Result<StepRecord, LearnError> {
    let shaped = sample.r + feedback.map_or(0.0, |f| weights.w_bql * f);
    Ok(StepRecord {
        delta: q.update(sample, shaped, params)?,
        source: source_of(feedback),
    })
}

fn source_of(feedback: Option<f64>) -> AdvantageSource {
    match feedback {
        Some(_) => AdvantageSource::Feedback,
        None => AdvantageSource::TdError,
    }
}

/// What drove one learning update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub delta: f64,
    pub source: AdvantageSource,
}

/// The interface every learner presents to the episode loops.
pub trait Learner: Send {
    fn select_action(&self, s: StateId, rng: &mut dyn RngCore) -> Result<ActionId, LearnError>;
    fn update(
        &mut self,
        sample: &TransitionSample,
        feedback: Option<f64>,
    ) -> Result<StepRecord, LearnError>;
    /// Action probabilities the planner samples availability from.
    fn action_probs(&self, s: StateId) -> Result<Vec<f64>, LearnError>;
    fn snapshot(&self) -> Vec<TableSnapshot>;
}

/// Softmax actor with a state-value critic.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub policy: PolicyParams,
    pub value: ValueParams,
    pub hyper: HyperParams,
}

impl ActorCritic {
    pub fn new(n_states: usize, n_actions: usize, hyper: HyperParams) -> Self {
        ActorCritic {
            policy: PolicyParams::new(n_states, n_actions),
            value: ValueParams::new(n_states),
            hyper,
        }
    }
}

impl Learner for ActorCritic {
    fn select_action(&self, s: StateId, rng: &mut dyn RngCore) -> Result<ActionId, LearnError> {
        self.policy.sample_action(s, rng)
    }

    fn update(
        &mut self,
        sample: &TransitionSample,
        feedback: Option<f64>,
    ) -> Result<StepRecord, LearnError> {
        ac_hf_step(
            &mut self.policy,
            &mut self.value,
            sample,
            feedback,
            &self.hyper,
        )
    }

    fn action_probs(&self, s: StateId) -> Result<Vec<f64>, LearnError> {
        self.policy.action_probs(s)
    }

    fn snapshot(&self) -> Vec<TableSnapshot> {
        vec![
            TableSnapshot::state_action(
                "policy",
                self.policy.n_states(),
                self.policy.n_actions(),
                self.policy.table(),
            ),
            TableSnapshot::state("value", self.value.table()),
        ]
    }
}

fn epsilon_greedy_probs(q: &QTable, s: StateId, epsilon: f64) -> Result<Vec<f64>, LearnError> {
    let greedy = q.greedy(s)?;
    let n = q.n_actions;
    let mut probs = vec![epsilon / n as f64; n];
    for a in &greedy {
        probs[a.0] += (1.0 - epsilon) / greedy.len() as f64;
    }
    Ok(probs)
}

#[derive(Debug, Clone)]
pub struct TamerRl {
    pub q: QTable,
    pub human: HumanModel,
    pub weights: ShapingWeights,
    pub params: QParams,
}

impl TamerRl {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        weights: ShapingWeights,
        params: QParams,
    ) -> Self {
        TamerRl {
            q: QTable::new(n_states, n_actions),
            human: HumanModel::new(n_states, n_actions),
            weights,
            params,
        }
    }
}

impl Learner for TamerRl {
    fn select_action(&self, s: StateId, rng: &mut dyn RngCore) -> Result<ActionId, LearnError> {
        self.q.epsilon_greedy(s, self.params.epsilon, rng)
    }

    fn update(
        &mut self,
        sample: &TransitionSample,
        feedback: Option<f64>,
    ) -> Result<StepRecord, LearnError> {
        tamer_rl_step(
            &mut self.q,
            &mut self.human,
            sample,
            feedback,
            &self.weights,
            &self.params,
        )
    }

    fn action_probs(&self, s: StateId) -> Result<Vec<f64>, LearnError> {
        epsilon_greedy_probs(&self.q, s, self.params.epsilon)
    }

    fn snapshot(&self) -> Vec<TableSnapshot> {
        let n_states = self.q.q.len() / self.q.n_actions;
        vec![
            TableSnapshot::state_action("q", n_states, self.q.n_actions, self.q.table()),
            TableSnapshot::state_action("human", n_states, self.q.n_actions, self.human.table()),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct BqlShaping {
    pub q: QTable,
    pub weights: ShapingWeights,
    pub params: QParams,
}

impl BqlShaping {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        weights: ShapingWeights,
        params: QParams,
    ) -> Self {
        BqlShaping {
            q: QTable::new(n_states, n_actions),
            weights,
            params,
        }
    }
}

impl Learner for BqlShaping {
    fn select_action(&self, s: StateId, rng: &mut dyn RngCore) -> Result<ActionId, LearnError> {
        self.q.epsilon_greedy(s, self.params.epsilon, rng)
    }

    fn update(
        &mut self,
        sample: &TransitionSample,
        feedback: Option<f64>,
    ) -> Result<StepRecord, LearnError> {
        bql_shaping_step(&mut self.q, sample, feedback, &self.weights, &self.params)
    }

    fn action_probs(&self, s: StateId) -> Result<Vec<f64>, LearnError> {
        epsilon_greedy_probs(&self.q, s, self.params.epsilon)
    }

    fn snapshot(&self) -> Vec<TableSnapshot> {
        let n_states = self.q.q.len() / self.q.n_actions;
        vec![TableSnapshot::state_action(
            "q",
            n_states,
            self.q.n_actions,
            self.q.table(),
        )]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error(transparent)]
    Plan(#[from] crate::planner::PlanError),
    #[error("executed step diverged from the plan at timestamp {0}")]
    Deviation(usize),
}

/// One executed step, for audit logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub sample: TransitionSample,
    pub feedback: Option<f64>,
    pub source: AdvantageSource,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeOutcome {
    pub ret: f64,
    pub steps: Vec<StepLog>,
    /// Actions in the plan, for planner-driven episodes.
    pub planned: Option<usize>,
    pub plan_failed: bool,
}

/// An episode in which the learner picks every action directly; runs until
/// a terminal step or the environment's step cap.
pub fn run_direct_episode(
    env: &dyn Environment,
    learner: &mut dyn Learner,
    feedback: &mut dyn FeedbackSource,
    action_rng: &mut dyn RngCore,
) -> Result<EpisodeOutcome, EpisodeError> {
    let mut s = env.reset();
    let mut outcome = EpisodeOutcome::default();
    for step in 1..=env.episode_cap() {
        let a = learner.select_action(s, action_rng)?;
        let out = env.step(s, a)?;
        let sample = TransitionSample {
            s,
            a,
            r: out.reward,
            s_next: out.next,
            terminal: out.terminal,
        };
        let f = feedback.feedback(s, a)?;
        let record = learner.update(&sample, f)?;
        outcome.ret += out.reward;
        outcome.steps.push(StepLog {
            step,
            sample,
            feedback: f,
            source: record.source,
        });
        if out.terminal {
            break;
        }
        s = out.next;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests;
