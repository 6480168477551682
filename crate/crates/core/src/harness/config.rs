use std::collections::{HashSet, VecDeque};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, HarnessError};
use crate::actor_critic::HyperParams;
use crate::baselines::{QParams, ShapingWeights};
use crate::envs::{EnvKind, Environment};
use crate::feedback::{FeedbackCase, Intent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Pacman,
    AcHf,
    TamerRl,
    BqlShaping,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Pacman,
        Algorithm::AcHf,
        Algorithm::TamerRl,
        Algorithm::BqlShaping,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Pacman => "pacman",
            Algorithm::AcHf => "ac_hf",
            Algorithm::TamerRl => "tamer_rl",
            Algorithm::BqlShaping => "bql_shaping",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == name)
    }

    /// The two shaping baselines are rebuilt from their original
    /// descriptions rather than taken from a reference implementation.
    pub fn is_reconstruction(self) -> bool {
        matches!(self, Algorithm::TamerRl | Algorithm::BqlShaping)
    }
}

/// One experiment: an algorithm on an environment under a feedback
/// scenario, repeated once per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    /// Map (Four Rooms) or instance (Taxi) file replacing the built-in one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corridor_length: Option<usize>,
    /// Four Rooms only: whether entering a red cell ends the episode.
    #[serde(default = "yes")]
    pub danger_terminal: bool,
    pub algorithm: Algorithm,
    /// Simulated trainer intent; no feedback at all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<Intent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<FeedbackCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxstamp: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxepisode: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Keep every transition and write per-step audit files.
    #[serde(default)]
    pub audit: bool,
    #[serde(default)]
    pub hyper: HyperParams,
    #[serde(default)]
    pub q: QParams,
    #[serde(default)]
    pub shaping: ShapingWeights,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(env: EnvKind, algorithm: Algorithm, seeds: Vec<u64>) -> Self {
        ExperimentConfig {
            env,
            env_file: None,
            corridor_length: None,
            danger_terminal: true,
            algorithm,
            intent: None,
            case: None,
            scenario_file: None,
            maxstamp: None,
            maxepisode: None,
            runs: None,
            seeds,
            output: None,
            audit: false,
            hyper: HyperParams::default(),
            q: QParams::default(),
            shaping: ShapingWeights::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.env_file,
            &mut config.scenario_file,
            &mut config.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serialises")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.seeds.is_empty() {
            return bad("`seeds` must not be empty".into());
        }
        if let Some(runs) = self.runs {
            if runs != self.seeds.len() {
                return bad(format!(
                    "`runs` is {runs} but {} seeds are given",
                    self.seeds.len()
                ));
            }
        }
        if self.maxepisode == Some(0) {
            return bad("`maxepisode` must be at least 1".into());
        }
        if self.maxstamp == Some(0) {
            return bad("`maxstamp` must be at least 1".into());
        }
        if self.case.is_some() && self.intent.is_none() && self.scenario_file.is_none() {
            return bad("`case` needs `intent` or `scenario_file`".into());
        }
        if self.env_file.is_some() && self.env == EnvKind::Corridor {
            return bad("the corridor takes `corridor_length`, not `env_file`".into());
        }
        if self.corridor_length.is_some() && self.env != EnvKind::Corridor {
            return bad("`corridor_length` applies only to the corridor".into());
        }
        self.hyper
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.q
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.shaping
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn maxepisode(&self) -> usize {
        self.maxepisode.unwrap_or(match self.env {
            EnvKind::FourRooms => 500,
            EnvKind::Taxi => 1000,
            EnvKind::Corridor => 100,
        })
    }

    /// Explicit `maxstamp`, or sixteen times the optimal plan length.
    pub fn maxstamp_for(&self, env: &dyn Environment) -> usize {
        self.maxstamp
            .unwrap_or_else(|| 16 * optimal_plan_length(env).unwrap_or(env.episode_cap()))
    }
}

/// Fewest actions taking the reset state to a state satisfying the
/// symbolic goal, following the environment's own transitions.
pub fn optimal_plan_length(env: &dyn Environment) -> Option<usize> {
    let sym = env.symbolic();
    let goal = sym.goal();
    let reached = |s| sym.world_state(s).is_some_and(|w| w.satisfies(goal));
    let start = env.reset();
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([(start, 0)]);
    while let Some((s, d)) = queue.pop_front() {
        if reached(s) {
            return Some(d);
        }
        if env.is_terminal(s) {
            continue;
        }
        for a in 0..env.n_actions() {
            let Ok(out) = env.step(s, crate::ids::ActionId(a)) else {
                continue;
            };
            if seen.insert(out.next) {
                queue.push_back((out.next, d + 1));
            }
        }
    }
    None
}
