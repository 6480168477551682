//! Sample-based symbolic planning.
//!
//! At every plan timestamp each state gets exactly one available action,
//! drawn from the current stochastic policy. Samples accumulate as the
//! horizon grows; a plan may take the single available action at its
//! current state or skip the timestamp. Among valid plans the search
//! returns one with the fewest executed actions, ties broken by the
//! earliest action timestamps.

mod dump;
mod search;

use std::collections::{HashMap, HashSet, VecDeque};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

use crate::action_lang::{ActionDescription, ActionLangError, PartialState, WorldState};
use crate::ids::ActionId;

pub use dump::dump_translation;
pub use search::PlanSearch;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("state {0} is outside the policy's domain")]
    UnknownState(String),
    #[error("policy returned an invalid distribution at {state}: {reason}")]
    InvalidDistribution { state: String, reason: String },
    #[error(transparent)]
    Lang(#[from] ActionLangError),
}

/// A stochastic policy over the actions of an action description.
pub trait StatePolicy {
    /// Probabilities indexed by [`ActionId`], in description order.
    fn distribution(&self, state: &WorldState) -> Result<Vec<f64>, PlanError>;
}

impl<F> StatePolicy for F
where
    F: Fn(&WorldState) -> Result<Vec<f64>, PlanError>,
{
    fn distribution(&self, state: &WorldState) -> Result<Vec<f64>, PlanError> {
        self(state)
    }
}

/// Uniform distribution over `n` actions everywhere.
#[derive(Debug, Clone, Copy)]
pub struct UniformPolicy(pub usize);

impl StatePolicy for UniformPolicy {
    fn distribution(&self, _state: &WorldState) -> Result<Vec<f64>, PlanError> {
        Ok(vec![1.0 / self.0 as f64; self.0])
    }
}

/// Availability facts for one timestamp: the single sampled action per state.
pub type AvailabilityFragment = HashMap<WorldState, ActionId>;

/// Accumulated availability facts for timestamps `1..=horizon()`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AvailabilitySample {
    layers: Vec<AvailabilityFragment>,
}

impl AvailabilitySample {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the facts for the next timestamp.
    pub fn push(&mut self, fragment: AvailabilityFragment) {
        self.layers.push(fragment);
    }

    pub fn horizon(&self) -> usize {
        self.layers.len()
    }

    /// Action available at `state` on timestamp `t` (1-based).
    pub fn get(&self, t: usize, state: &WorldState) -> Option<ActionId> {
        t.checked_sub(1)
            .and_then(|i| self.layers.get(i))
            .and_then(|layer| layer.get(state).copied())
    }

    pub fn fragment(&self, t: usize) -> Option<&AvailabilityFragment> {
        t.checked_sub(1).and_then(|i| self.layers.get(i))
    }

    /// Builds a sample from explicit `(t, state, action)` facts.
    pub fn from_facts(facts: impl IntoIterator<Item = (usize, WorldState, ActionId)>) -> Self {
        let mut sample = AvailabilitySample::new();
        for (t, state, action) in facts {
            assert!(t >= 1, "timestamps start at 1");
            while sample.layers.len() < t {
                sample.layers.push(HashMap::new());
            }
            sample.layers[t - 1].insert(state, action);
        }
        sample
    }
}

/// `(I, G, D, π)` plus the states over which availability is sampled.
pub struct PlanningProblem<'a, P: StatePolicy + ?Sized> {
    pub description: &'a ActionDescription,
    pub initial: PartialState,
    pub goal: PartialState,
    pub policy: &'a P,
    pub states: &'a [WorldState],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub timestamp: usize,
    pub state: WorldState,
    /// `None` for a skipped timestamp.
    pub action: Option<ActionId>,
}

/// A timestamped plan. Steps run from timestamp 1 to the last executed
/// action; skipped timestamps in between are kept as explicit steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub initial: WorldState,
    pub steps: Vec<PlanStep>,
    pub terminal: WorldState,
}

impl Plan {
    /// `(timestamp, state before, action)` for executed steps only.
    pub fn executed(&self) -> impl Iterator<Item = (usize, &WorldState, ActionId)> {
        self.steps
            .iter()
            .filter_map(|s| s.action.map(|a| (s.timestamp, &s.state, a)))
    }

    pub fn action_count(&self) -> usize {
        self.steps.iter().filter(|s| s.action.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.action_count() == 0
    }

    pub fn action_timestamps(&self) -> Vec<usize> {
        self.executed().map(|(t, _, _)| t).collect()
    }

    /// Human-readable form such as `moveright@1, skip@2, moveright@3`.
    pub fn describe(&self, description: &ActionDescription) -> String {
        self.steps
            .iter()
            .map(|s| match s.action {
                Some(a) => format!("{}@{}", description.action_name(a), s.timestamp),
                None => format!("skip@{}", s.timestamp),
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Draws one action per state from the policy for a single timestamp.
pub fn sample_availability<P, R>(
    policy: &P,
    states: &[WorldState],
    rng: &mut R,
) -> Result<AvailabilityFragment, PlanError>
where
    P: StatePolicy + ?Sized,
    R: Rng + ?Sized,
{
    let mut fragment = HashMap::with_capacity(states.len());
    for state in states {
        let probs = policy.distribution(state)?;
        let dist = WeightedIndex::new(&probs).map_err(|e| PlanError::InvalidDistribution {
            state: format!("{:?}", state.indices()),
            reason: e.to_string(),
        })?;
        fragment.insert(state.clone(), ActionId(dist.sample(rng)));
    }
    Ok(fragment)
}

/// Iterative-horizon planning.
///
/// For `k = 1 .. maxstamp-1` a fresh fragment is sampled for timestamp `k`
/// and added to the accumulated sample; the first horizon at which a plan
/// exists yields the plan. Earlier fragments are never resampled.
pub fn solve<P, R>(
    problem: &PlanningProblem<'_, P>,
    maxstamp: usize,
    rng: &mut R,
) -> Result<Option<Plan>, PlanError>
where
    P: StatePolicy + ?Sized,
    R: Rng + ?Sized,
{
    solve_with(
        problem.description,
        &problem.initial,
        &problem.goal,
        maxstamp,
        |_| sample_availability(problem.policy, problem.states, rng),
    )
    .map(|(plan, _)| plan)
}

/// [`solve`] with an arbitrary source of per-timestamp fragments. Also
/// returns the accumulated availability.
pub fn solve_with<F>(
    description: &ActionDescription,
    initial: &PartialState,
    goal: &PartialState,
    maxstamp: usize,
    mut sample: F,
) -> Result<(Option<Plan>, AvailabilitySample), PlanError>
where
    F: FnMut(usize) -> Result<AvailabilityFragment, PlanError>,
{
    let start = description.complete(initial)?;
    let mut search = PlanSearch::new(description, start);
    let mut availability = AvailabilitySample::new();
    for k in 1..maxstamp {
        availability.push(sample(k)?);
        search.extend(availability.fragment(k).expect("fragment just pushed"))?;
        if let Some(plan) = search.best_plan(goal) {
            return Ok((Some(plan), availability));
        }
    }
    Ok((None, availability))
}

/// Best plan within horizon `k` for a fixed availability sample.
pub fn plan_search(
    description: &ActionDescription,
    availability: &AvailabilitySample,
    initial: &PartialState,
    goal: &PartialState,
    k: usize,
) -> Result<Option<Plan>, PlanError> {
    let start = description.complete(initial)?;
    let mut search = PlanSearch::new(description, start);
    let empty = AvailabilityFragment::new();
    for t in 1..=k {
        search.extend(availability.fragment(t).unwrap_or(&empty))?;
    }
    Ok(search.best_plan(goal))
}

/// Every state reachable from `start` by any sequence of actions, in
/// breadth-first order.
pub fn reachable_states(
    description: &ActionDescription,
    start: &WorldState,
) -> Result<Vec<WorldState>, PlanError> {
    let mut seen = HashSet::from([start.clone()]);
    let mut order = vec![start.clone()];
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(s) = queue.pop_front() {
        for a in 0..description.actions().len() {
            let next = description.apply(&s, ActionId(a))?;
            if seen.insert(next.clone()) {
                order.push(next.clone());
                queue.push_back(next);
            }
        }
    }
    Ok(order)
}

/// Checks a plan step by step against the semantics and the availability
/// facts. Independent of the search that produced it.
pub fn validate_plan(
    plan: &Plan,
    description: &ActionDescription,
    availability: &AvailabilitySample,
    initial: &PartialState,
    goal: &PartialState,
) -> Result<(), String> {
    if !plan.initial.satisfies(initial) {
        return Err("first state does not satisfy the initial condition".into());
    }
    let mut current = plan.initial.clone();
    for (i, step) in plan.steps.iter().enumerate() {
        if step.timestamp != i + 1 {
            return Err(format!("step {i} has timestamp {}", step.timestamp));
        }
        if step.state != current {
            return Err(format!(
                "state mismatch before timestamp {}",
                step.timestamp
            ));
        }
        if let Some(action) = step.action {
            if availability.get(step.timestamp, &current) != Some(action) {
                return Err(format!(
                    "action {} not available at timestamp {}",
                    description.action_name(action),
                    step.timestamp
                ));
            }
            current = description
                .apply(&current, action)
                .map_err(|e| e.to_string())?;
        }
    }
    if current != plan.terminal {
        return Err("terminal state does not follow from the steps".into());
    }
    if !plan.terminal.satisfies(goal) {
        return Err("terminal state does not satisfy the goal".into());
    }
    Ok(())
}
