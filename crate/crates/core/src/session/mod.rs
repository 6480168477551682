//! Live trainer sessions: one learner stepping through episodes while a
//! human watches and comments.
//!
//! A [`Session`] is a synchronous state machine. Its owner supplies the
//! clock (`now`, measured from any fixed origin) and decides when to call
//! [`Session::advance`]; [`Session::due`] says whether the pacing allows a
//! step. Each advance finishes the previous step's update with whatever
//! feedback was attributed to it, then executes one more transition, so the
//! learner sees exactly the sequence of calls a headless run would make.

pub mod protocol;

use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_lang::WorldState;
use crate::actor_critic::TransitionSample;
use crate::baselines::{EpisodeError, Learner, StepLog};
use crate::envs::{EnvError, Environment, Layout};
use crate::feedback::{Attribution, FeedbackError, LiveFeedback, DEFAULT_WINDOW};
use crate::harness::{
    new_learner, plan_episode, run_rngs, Algorithm, ExperimentConfig, HarnessError, RunResult,
    Setup,
};
use crate::ids::{ActionId, StateId};

use protocol::{
    Control, Envelope, FeedbackMessage, Message, PlanUpdate, PlannedStep, Snapshot, StateUpdate,
};

pub const DEFAULT_INTERVAL_MS: u64 = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Pacing {
    /// One step per `step` control.
    StepOnDemand,
    /// One step every `interval_ms`.
    Timed { interval_ms: u64 },
}

impl Default for Pacing {
    fn default() -> Self {
        Pacing::Timed {
            interval_ms: DEFAULT_INTERVAL_MS,
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Setup(#[from] HarnessError),
    #[error("episode {episode}: {source}")]
    Episode {
        episode: usize,
        source: EpisodeError,
    },
    #[error("{0}")]
    Rejected(String),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
}

fn episode_err<E: Into<EpisodeError>>(episode: usize) -> impl FnOnce(E) -> SessionError {
    move |e| SessionError::Episode {
        episode,
        source: e.into(),
    }
}

struct Running {
    episode: usize,
    state: StateId,
    ret: f64,
    steps_done: usize,
    /// Remaining planned `(state before, action)` pairs; `None` when the
    /// learner picks actions directly.
    plan: Option<std::vec::IntoIter<(usize, WorldState, ActionId)>>,
}

struct Pending {
    step: u64,
    episode_step: usize,
    sample: TransitionSample,
    ends_episode: bool,
}

pub struct Session {
    config: ExperimentConfig,
    setup: Setup,
    learner: Box<dyn Learner>,
    rng: ChaCha8Rng,
    pacing: Pacing,
    paused: bool,
    requested: u64,
    last_tick: Option<Duration>,
    live: LiveFeedback,
    step: u64,
    running: Option<Running>,
    pending: Option<Pending>,
    result: RunResult,
    events: Vec<Envelope>,
}

impl Session {
    /// A session over the first seed of `config`. Simulated-trainer settings
    /// in the config are ignored: feedback comes only from the client.
    pub fn new(config: ExperimentConfig, pacing: Pacing) -> Result<Self, SessionError> {
        config.validate()?;
        validate_pacing(pacing)?;
        let setup = Setup::load(&config)?;
        let learner = new_learner(&config, setup.env.as_ref());
        let seed = config.seeds[0];
        let (rng, _) = run_rngs(seed);
        Ok(Session {
            result: RunResult {
                seed,
                returns: Vec::new(),
                plan_failures: Vec::new(),
                updates: 0,
                feedback_updates: 0,
                audit: Vec::new(),
            },
            config,
            setup,
            learner,
            rng,
            pacing,
            paused: false,
            requested: 0,
            last_tick: None,
            live: LiveFeedback::new(DEFAULT_WINDOW),
            step: 0,
            running: None,
            pending: None,
            events: Vec::new(),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn env(&self) -> &dyn Environment {
        self.setup.env.as_ref()
    }

    pub fn layout(&self) -> Layout {
        self.setup.env.layout()
    }

    pub fn pacing(&self) -> Pacing {
        self.pacing
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    /// All episodes have run and the last update is done.
    pub fn is_finished(&self) -> bool {
        self.result.returns.len() >= self.config.maxepisode() && self.pending.is_none()
    }

    /// Session-wide count of executed transitions.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Completed episodes.
    pub fn episode(&self) -> usize {
        self.result.returns.len()
    }

    /// Outcome so far, in the same form as a headless run with auditing.
    pub fn result(&self) -> &RunResult {
        &self.result
    }

    pub fn learner(&self) -> &dyn Learner {
        self.learner.as_ref()
    }

    pub fn feedback_dropped(&self) -> u64 {
        self.live.dropped()
    }

    pub fn feedback_accepted(&self) -> u64 {
        self.live.accepted()
    }

    /// Every event emitted so far; `seq` of `events()[i]` is `i + 1`.
    pub fn events(&self) -> &[Envelope] {
        &self.events
    }

    /// Events with `seq >= from`.
    pub fn events_from(&self, from: u64) -> &[Envelope] {
        let start = (from.max(1) - 1) as usize;
        self.events.get(start..).unwrap_or(&[])
    }

    pub fn last_seq(&self) -> u64 {
        self.events.len() as u64
    }

    fn emit(&mut self, message: Message) -> Envelope {
        push_event(&mut self.events, message)
    }

    /// Whether pacing allows [`Session::advance`] at `now`.
    pub fn due(&self, now: Duration) -> bool {
        if self.paused || self.is_finished() {
            return false;
        }
        match self.pacing {
            Pacing::StepOnDemand => self.requested > 0,
            Pacing::Timed { interval_ms } => match self.last_tick {
                None => true,
                Some(t) => now >= t + Duration::from_millis(interval_ms),
            },
        }
    }

    /// Time until the next timed step, if one is scheduled.
    pub fn next_due(&self, now: Duration) -> Option<Duration> {
        if self.paused || self.is_finished() {
            return None;
        }
        match self.pacing {
            Pacing::StepOnDemand => (self.requested > 0).then_some(Duration::ZERO),
            Pacing::Timed { interval_ms } => Some(match self.last_tick {
                None => Duration::ZERO,
                Some(t) => (t + Duration::from_millis(interval_ms)).saturating_sub(now),
            }),
        }
    }

    /// Advances if [`Session::due`]; returns the events emitted.
    pub fn tick(&mut self, now: Duration) -> Result<Vec<Envelope>, SessionError> {
        if self.due(now) {
            self.advance(now)
        } else {
            Ok(Vec::new())
        }
    }

    /// Finishes the pending update, starts an episode if none is running
    /// and executes one transition, ignoring pacing.
    pub fn advance(&mut self, now: Duration) -> Result<Vec<Envelope>, SessionError> {
        let first = self.events.len();
        self.last_tick = Some(now);
        self.requested = self.requested.saturating_sub(1);
        self.finish_pending()?;
        if self.result.returns.len() < self.config.maxepisode() {
            if self.running.is_none() {
                self.start_episode()?;
            }
            if self.running.is_some() {
                self.execute_step(now)?;
            }
        }
        if self.is_finished() {
            let snap = self.snapshot();
            self.emit(Message::Snapshot(snap));
        }
        Ok(self.events[first..].to_vec())
    }

    fn finish_pending(&mut self) -> Result<(), SessionError> {
        let Some(p) = self.pending.take() else {
            return Ok(());
        };
        let running = self
            .running
            .as_ref()
            .expect("a pending step belongs to an episode");
        let episode = running.episode;
        let f = self.live.take(p.step);
        let record = self
            .learner
            .update(&p.sample, f)
            .map_err(episode_err(episode))?;
        self.result.updates += 1;
        if f.is_some() {
            self.result.feedback_updates += 1;
        }
        self.result.audit.push((
            episode,
            StepLog {
                step: p.episode_step,
                sample: p.sample,
                feedback: f,
                source: record.source,
            },
        ));
        if p.ends_episode {
            let running = self.running.take().unwrap();
            self.result.returns.push(running.ret);
        }
        Ok(())
    }

    fn start_episode(&mut self) -> Result<(), SessionError> {
        let episode = self.result.returns.len() + 1;
        let env = self.setup.env.as_ref();
        let state = env.reset();
        let mut running = Running {
            episode,
            state,
            ret: 0.0,
            steps_done: 0,
            plan: None,
        };
        if self.config.algorithm == Algorithm::Pacman {
            let plan = plan_episode(
                env,
                self.learner.as_ref(),
                self.setup.maxstamp,
                &mut self.rng,
            )
            .map_err(episode_err(episode))?;
            let sym = env.symbolic();
            let update = PlanUpdate {
                episode,
                found: plan.is_some(),
                steps: plan
                    .as_ref()
                    .map(|p| {
                        p.steps
                            .iter()
                            .map(|s| {
                                let id = sym.state_id(&s.state);
                                let view = id.and_then(|id| env.view(id).ok());
                                PlannedStep {
                                    timestamp: s.timestamp,
                                    state: id.map_or(usize::MAX, |id| id.0),
                                    agent: view.unwrap_or(crate::envs::AgentView {
                                        row: 0,
                                        col: 0,
                                        passenger: None,
                                    }),
                                    action: s.action.map(|a| action_name(env, a)),
                                }
                            })
                            .collect()
                    })
                    .unwrap_or_default(),
            };
            push_event(&mut self.events, Message::PlanUpdate(update));
            let Some(plan) = plan else {
                self.result.plan_failures.push(episode);
                self.result.returns.push(0.0);
                return Ok(());
            };
            if sym.world_state(state) != Some(&plan.initial) {
                return Err(episode_err(episode)(EpisodeError::Deviation(0)));
            }
            let steps: Vec<_> = plan.executed().map(|(t, w, a)| (t, w.clone(), a)).collect();
            if steps.is_empty() {
                self.result.returns.push(0.0);
                return Ok(());
            }
            running.plan = Some(steps.into_iter());
        }
        self.running = Some(running);
        Ok(())
    }

    fn execute_step(&mut self, now: Duration) -> Result<(), SessionError> {
        let env = self.setup.env.as_ref();
        let running = self.running.as_mut().expect("an episode is running");
        let episode = running.episode;
        let s = running.state;
        let a = match running.plan.as_mut() {
            Some(plan) => {
                let (t, world, a) = plan.next().expect("running plans have steps left");
                if env.symbolic().world_state(s) != Some(&world) {
                    return Err(episode_err(episode)(EpisodeError::Deviation(t)));
                }
                a
            }
            None => self
                .learner
                .select_action(s, &mut self.rng)
                .map_err(episode_err(episode))?,
        };
        let out = env.step(s, a).map_err(episode_err::<EnvError>(episode))?;
        running.steps_done += 1;
        running.ret += out.reward;
        running.state = out.next;
        let ends_episode = out.terminal
            || match running.plan.as_ref() {
                Some(plan) => plan.len() == 0,
                None => running.steps_done >= env.episode_cap(),
            };
        self.step += 1;
        let sample = TransitionSample {
            s,
            a,
            r: out.reward,
            s_next: out.next,
            terminal: out.terminal,
        };
        let update = StateUpdate {
            episode,
            step: self.step,
            episode_step: running.steps_done,
            state: s.0,
            agent: env.view(s).map_err(episode_err::<EnvError>(episode))?,
            action: Some(action_name(env, a)),
            reward: out.reward,
            next_state: out.next.0,
            next_agent: env
                .view(out.next)
                .map_err(episode_err::<EnvError>(episode))?,
            episode_return: running.ret,
            done: ends_episode,
        };
        self.pending = Some(Pending {
            step: self.step,
            episode_step: running.steps_done,
            sample,
            ends_episode,
        });
        self.emit(Message::StateUpdate(update));
        self.live.show(self.step, now);
        Ok(())
    }

    /// Attributes trainer feedback arriving at `now` and acknowledges it on
    /// the event stream. Feedback while paused is rejected.
    pub fn submit_feedback(
        &mut self,
        value: f64,
        client_time_ms: Option<u64>,
        now: Duration,
    ) -> Result<Envelope, SessionError> {
        let ack = |accepted: bool, step: Option<u64>, reason: Option<&str>| FeedbackMessage {
            value,
            client_time_ms,
            accepted: Some(accepted),
            step,
            reason: reason.map(str::to_string),
        };
        let message = if self.paused {
            ack(false, None, Some("session is paused"))
        } else if self.is_finished() {
            ack(false, None, Some("session is finished"))
        } else {
            match self.live.submit(value, now)? {
                Attribution::Accepted { step, .. } => ack(true, Some(step), None),
                Attribution::Dropped => {
                    ack(false, None, Some("no step within the attribution window"))
                }
            }
        };
        Ok(self.emit(Message::Feedback(message)))
    }

    /// Applies a control command and echoes it on the event stream.
    pub fn control(&mut self, control: Control) -> Result<Envelope, SessionError> {
        let reject = |m: &str| Err(SessionError::Rejected(m.to_string()));
        match control {
            Control::Pause => self.paused = true,
            Control::Resume => self.paused = false,
            Control::Step => {
                if self.pacing != Pacing::StepOnDemand {
                    return reject("`step` needs step-on-demand pacing");
                }
                if self.paused {
                    return reject("session is paused");
                }
                if self.is_finished() {
                    return reject("session is finished");
                }
                self.requested += 1;
            }
            Control::Speed { interval_ms } => {
                let pacing = Pacing::Timed { interval_ms };
                validate_pacing(pacing)?;
                self.pacing = pacing;
                self.requested = 0;
            }
            Control::Manual => self.pacing = Pacing::StepOnDemand,
        }
        Ok(self.emit(Message::Control(control)))
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            episode: self.result.returns.len(),
            step: self.step,
            returns: self.result.returns.clone(),
            feedback_accepted: self.live.accepted(),
            feedback_dropped: self.live.dropped(),
            tables: self.learner.snapshot(),
        }
    }
}

fn push_event(events: &mut Vec<Envelope>, message: Message) -> Envelope {
    let env = Envelope::new(events.len() as u64 + 1, message);
    events.push(env.clone());
    env
}

fn validate_pacing(pacing: Pacing) -> Result<(), SessionError> {
    match pacing {
        Pacing::Timed { interval_ms: 0 } => Err(SessionError::Rejected(
            "`interval_ms` must be at least 1".into(),
        )),
        _ => Ok(()),
    }
}

fn action_name(env: &dyn Environment, a: ActionId) -> String {
    env.action_names()
        .get(a.0)
        .map_or_else(|| format!("#{}", a.0), |n| n.to_string())
}
