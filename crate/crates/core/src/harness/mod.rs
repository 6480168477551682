//! Experiment orchestration: configuration, seeded repeated runs of any
//! learner, aggregation, and plot-ready output.

mod config;
mod episode;
mod output;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{
    run_direct_episode, ActorCritic, BqlShaping, EpisodeError, EpisodeOutcome, Learner, StepLog,
    TamerRl,
};
use crate::envs::{
    build_env, Corridor, EnvError, EnvKind, Environment, FourRooms, FourRoomsMap, FourRoomsRewards,
    DEFAULT_FOUR_ROOMS_MAP,
};
use crate::feedback::{
    build_scenario, FeedbackError, FeedbackScenario, FeedbackSource, Oracle, Silent,
};

pub use config::{optimal_plan_length, Algorithm, ExperimentConfig};
pub use episode::{execute_plan, plan_episode, run_pacman_episode};
pub use output::{
    aggregate_curves, curves_from_dir, format_aggregate, format_audit, format_run, parse_run_csv,
    write_outputs, Aggregate,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error("run {run} (seed {seed}), episode {episode}: {source}")]
    Episode {
        run: usize,
        seed: u64,
        episode: usize,
        source: EpisodeError,
    },
    #[error("runs have different lengths ({0} vs {1})")]
    Ragged(usize, usize),
    #[error("{path} line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}

/// Stream ids for the independent random sequences of one run.
pub const PLANNER_STREAM: u64 = 1;
pub const FEEDBACK_STREAM: u64 = 2;

/// Random streams for one seeded run: one for planning and action
/// selection, one for the simulated trainer.
pub fn run_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut planner = base.clone();
    planner.set_stream(PLANNER_STREAM);
    let mut feedback = base;
    feedback.set_stream(FEEDBACK_STREAM);
    (planner, feedback)
}

/// Everything one seeded run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub returns: Vec<f64>,
    /// Episodes (1-based) in which the planner found no plan.
    pub plan_failures: Vec<usize>,
    pub updates: usize,
    pub feedback_updates: usize,
    /// `(episode, step)` records, kept only when auditing.
    pub audit: Vec<(usize, StepLog)>,
}

impl RunResult {
    pub fn mean_return(&self, episodes: std::ops::Range<usize>) -> f64 {
        let slice = &self.returns[episodes];
        slice.iter().sum::<f64>() / slice.len() as f64
    }

    pub fn final_mean(&self, n: usize) -> f64 {
        let len = self.returns.len();
        self.mean_return(len.saturating_sub(n)..len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub runs: Vec<RunResult>,
    pub aggregate: Aggregate,
}

/// Loaded environment and scenario shared by every run of an experiment.
pub struct Setup {
    pub env: Box<dyn Environment>,
    pub scenario: Option<FeedbackScenario>,
    pub maxstamp: usize,
}

impl Setup {
    pub fn load(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        let source = match &config.env_file {
            Some(path) => Some(std::fs::read_to_string(path).map_err(io_err(path))?),
            None => None,
        };
        let env: Box<dyn Environment> = match config.env {
            EnvKind::FourRooms if !config.danger_terminal => {
                let map = FourRoomsMap::parse(source.as_deref().unwrap_or(DEFAULT_FOUR_ROOMS_MAP))?;
                let rewards = FourRoomsRewards {
                    danger_terminal: false,
                    ..FourRoomsRewards::default()
                };
                Box::new(FourRooms::new(map, rewards)?)
            }
            EnvKind::Corridor => Box::new(Corridor::new(config.corridor_length.unwrap_or(3))?),
            kind => build_env(kind, source.as_deref())?,
        };
        let scenario = match (&config.scenario_file, config.intent) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).map_err(io_err(path))?;
                let mut sc = FeedbackScenario::parse(&text)?;
                if sc.env != env.name() {
                    return Err(HarnessError::Config(format!(
                        "scenario is for `{}`, environment is `{}`",
                        sc.env,
                        env.name()
                    )));
                }
                if let Some(case) = config.case {
                    sc.params = case.params();
                }
                Some(sc)
            }
            (None, Some(intent)) => Some(build_scenario(
                env.as_ref(),
                intent,
                config
                    .case
                    .unwrap_or(crate::feedback::FeedbackCase::Ideal)
                    .params(),
            )),
            (None, None) => None,
        };
        let maxstamp = config.maxstamp_for(env.as_ref());
        Ok(Setup {
            env,
            scenario,
            maxstamp,
        })
    }
}

pub(crate) fn new_learner(config: &ExperimentConfig, env: &dyn Environment) -> Box<dyn Learner> {
    let (n, m) = (env.n_states(), env.n_actions());
    match config.algorithm {
        Algorithm::Pacman | Algorithm::AcHf => Box::new(ActorCritic::new(n, m, config.hyper)),
        Algorithm::TamerRl => Box::new(TamerRl::new(n, m, config.shaping, config.q)),
        Algorithm::BqlShaping => Box::new(BqlShaping::new(n, m, config.shaping, config.q)),
    }
}

/// One seeded run of `config.maxepisode()` episodes.
pub fn run_single(
    config: &ExperimentConfig,
    setup: &Setup,
    run: usize,
    seed: u64,
) -> Result<RunResult, HarnessError> {
    let env = setup.env.as_ref();
    let mut learner = new_learner(config, env);
    let (mut action_rng, feedback_rng) = run_rngs(seed);
    let mut silent = Silent;
    let mut oracle = setup.scenario.as_ref().map(|scenario| Oracle {
        scenario,
        rng: feedback_rng,
    });
    let mut result = RunResult {
        seed,
        returns: Vec::with_capacity(config.maxepisode()),
        plan_failures: Vec::new(),
        updates: 0,
        feedback_updates: 0,
        audit: Vec::new(),
    };
    for episode in 1..=config.maxepisode() {
        let source: &mut dyn FeedbackSource = match oracle.as_mut() {
            Some(o) => o,
            None => &mut silent,
        };
        let outcome: Result<EpisodeOutcome, EpisodeError> = match config.algorithm {
            Algorithm::Pacman => run_pacman_episode(
                env,
                learner.as_mut(),
                source,
                setup.maxstamp,
                &mut action_rng,
            ),
            _ => run_direct_episode(env, learner.as_mut(), source, &mut action_rng),
        };
        let outcome = outcome.map_err(|source| HarnessError::Episode {
            run,
            seed,
            episode,
            source,
        })?;
        result.returns.push(outcome.ret);
        if outcome.plan_failed {
            result.plan_failures.push(episode);
        }
        result.updates += outcome.steps.len();
        result.feedback_updates += outcome
            .steps
            .iter()
            .filter(|s| s.feedback.is_some())
            .count();
        if config.audit {
            result
                .audit
                .extend(outcome.steps.into_iter().map(|s| (episode, s)));
        }
    }
    Ok(result)
}

/// All runs of an experiment, in parallel, aggregated per episode. Output
/// files are written when the config names an output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<LearningCurve, HarnessError> {
    config.validate()?;
    let setup = Setup::load(config)?;
    let curve = run_with_setup(config, &setup)?;
    if let Some(dir) = &config.output {
        write_outputs(dir, config, &setup, &curve)?;
    }
    Ok(curve)
}

pub fn run_with_setup(
    config: &ExperimentConfig,
    setup: &Setup,
) -> Result<LearningCurve, HarnessError> {
    let runs: Vec<RunResult> = config
        .seeds
        .par_iter()
        .enumerate()
        .map(|(i, seed)| run_single(config, setup, i, *seed))
        .collect::<Result<_, _>>()?;
    let curves: Vec<Vec<f64>> = runs.iter().map(|r| r.returns.clone()).collect();
    let aggregate = aggregate_curves(&curves)?;
    Ok(LearningCurve { runs, aggregate })
}
