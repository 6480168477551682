use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngCore;

use crate::actor_critic::TransitionSample;
use crate::baselines::{EpisodeError, EpisodeOutcome, Learner, StepLog};
use crate::envs::Environment;
use crate::feedback::FeedbackSource;
use crate::ids::ActionId;
use crate::planner::{solve_with, AvailabilityFragment, Plan, PlanError};

/// Plans over availability sampled from the learner's current policy.
///
/// The policy is fixed for the whole planning call, so each state's
/// distribution is built once and sampled at every timestamp.
pub fn plan_episode(
    env: &dyn Environment,
    learner: &dyn Learner,
    maxstamp: usize,
    rng: &mut dyn RngCore,
) -> Result<Option<Plan>, EpisodeError> {
    let sym = env.symbolic();
    let states = sym.planning_states();
    let mut dists = Vec::with_capacity(states.len());
    for world in states {
        let id = sym
            .state_id(world)
            .expect("planning states come from the state mapping");
        let probs = learner.action_probs(id)?;
        let dist = WeightedIndex::new(&probs).map_err(|e| PlanError::InvalidDistribution {
            state: env.state_label(id),
            reason: e.to_string(),
        })?;
        dists.push(dist);
    }
    let (plan, _) = solve_with(
        sym.description(),
        sym.initial(),
        sym.goal(),
        maxstamp,
        |_| -> Result<AvailabilityFragment, PlanError> {
            Ok(states
                .iter()
                .zip(&dists)
                .map(|(w, d)| (w.clone(), ActionId(d.sample(rng))))
                .collect())
        },
    )?;
    Ok(plan)
}

/// One planner-actor-critic episode: plan once, then execute the plan's
/// actions in order, learning from every executed transition.
///
/// A planning failure ends the episode with no samples and return 0. The
/// episode also ends early if the environment leaves the predicted state
/// sequence or reaches a terminal state.
pub fn run_pacman_episode(
    env: &dyn Environment,
    learner: &mut dyn Learner,
    feedback: &mut dyn FeedbackSource,
    maxstamp: usize,
    planner_rng: &mut dyn RngCore,
) -> Result<EpisodeOutcome, EpisodeError> {
    let Some(plan) = plan_episode(env, learner, maxstamp, planner_rng)? else {
        return Ok(EpisodeOutcome {
            plan_failed: true,
            ..EpisodeOutcome::default()
        });
    };
    execute_plan(env, learner, feedback, &plan)
}

/// Runs `plan` from the environment's reset state.
pub fn execute_plan(
    env: &dyn Environment,
    learner: &mut dyn Learner,
    feedback: &mut dyn FeedbackSource,
    plan: &Plan,
) -> Result<EpisodeOutcome, EpisodeError> {
    let sym = env.symbolic();
    let mut outcome = EpisodeOutcome {
        planned: Some(plan.action_count()),
        ..EpisodeOutcome::default()
    };
    let mut s = env.reset();
    if sym.world_state(s) != Some(&plan.initial) {
        return Err(EpisodeError::Deviation(0));
    }
    for (n, (t, world, a)) in plan.executed().enumerate() {
        if sym.world_state(s) != Some(world) {
            return Err(EpisodeError::Deviation(t));
        }
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
            step: n + 1,
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
