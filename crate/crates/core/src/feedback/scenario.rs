use std::collections::BTreeSet;
use std::fmt::Write;

use super::{FeedbackError, FeedbackParams, Intent};
use crate::envs::Environment;
use crate::ids::{ActionId, StateId};

const HEADER: &str = "# pacman-lab scenario v1";
const MAX_ID: usize = 1 << 24;

/// The preferred-action table behind a simulated trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackScenario {
    pub env: String,
    pub intent: Intent,
    pub params: FeedbackParams,
    preferred: BTreeSet<(StateId, ActionId)>,
}

/// Scenario for `env` from the environment's own notion of helpful and
/// misleading guidance.
pub fn build_scenario(
    env: &dyn Environment,
    intent: Intent,
    params: FeedbackParams,
) -> FeedbackScenario {
    let preferred = env
        .preferences(intent)
        .into_iter()
        .flat_map(|(s, actions)| actions.into_iter().map(move |a| (s, a)))
        .collect();
    FeedbackScenario {
        env: env.name().to_string(),
        intent,
        params,
        preferred,
    }
}

fn format_err(line: usize, message: impl Into<String>) -> FeedbackError {
    FeedbackError::Format {
        line,
        message: message.into(),
    }
}

impl FeedbackScenario {
    pub fn new(
        env: &str,
        intent: Intent,
        params: FeedbackParams,
        preferred: impl IntoIterator<Item = (StateId, ActionId)>,
    ) -> Self {
        FeedbackScenario {
            env: env.to_string(),
            intent,
            params,
            preferred: preferred.into_iter().collect(),
        }
    }

    pub fn prefers(&self, state: StateId, action: ActionId) -> bool {
        self.preferred.contains(&(state, action))
    }

    /// Whether the scenario says anything about `state`.
    pub fn covers(&self, state: StateId) -> bool {
        self.preferred
            .range((state, ActionId(0))..=(state, ActionId(usize::MAX)))
            .next()
            .is_some()
    }

    pub fn preferred(&self) -> impl Iterator<Item = (StateId, ActionId)> + '_ {
        self.preferred.iter().copied()
    }

    pub fn preferred_at(&self, state: StateId) -> Vec<ActionId> {
        self.preferred
            .range((state, ActionId(0))..=(state, ActionId(usize::MAX)))
            .map(|(_, a)| *a)
            .collect()
    }

    /// ```text
    /// # pacman-lab scenario v1
    /// env four_rooms
    /// intent helpful
    /// p_give 0.5
    /// p_flip 0.3
    /// prefer 52 0
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "env {}", self.env);
        let _ = writeln!(out, "intent {}", self.intent.as_str());
        let _ = writeln!(out, "p_give {:?}", self.params.p_give);
        let _ = writeln!(out, "p_flip {:?}", self.params.p_flip);
        for (s, a) in &self.preferred {
            let _ = writeln!(out, "prefer {} {}", s.0, a.0);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, FeedbackError> {
        let mut env = None;
        let mut intent = None;
        let mut params = FeedbackParams::default();
        let mut preferred = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let prob = |s: &str, name: &'static str| -> Result<f64, FeedbackError> {
                let value: f64 = s
                    .parse()
                    .map_err(|_| format_err(line, format!("bad number `{s}`")))?;
                if !(0.0..=1.0).contains(&value) {
                    return Err(FeedbackError::Probability { name, value });
                }
                Ok(value)
            };
            let id = |s: &str| -> Result<usize, FeedbackError> {
                s.parse()
                    .ok()
                    .filter(|n| *n < MAX_ID)
                    .ok_or_else(|| format_err(line, format!("bad id `{s}`")))
            };
            match fields[..] {
                ["env", name] => {
                    if env.replace(name.to_string()).is_some() {
                        return Err(format_err(line, "duplicate `env`"));
                    }
                }
                ["intent", name] => {
                    let parsed = Intent::parse(name)
                        .ok_or_else(|| format_err(line, format!("unknown intent `{name}`")))?;
                    if intent.replace(parsed).is_some() {
                        return Err(format_err(line, "duplicate `intent`"));
                    }
                }
                ["p_give", v] => params.p_give = prob(v, "p_give")?,
                ["p_flip", v] => params.p_flip = prob(v, "p_flip")?,
                ["prefer", s, a] => {
                    if !preferred.insert((StateId(id(s)?), ActionId(id(a)?))) {
                        return Err(format_err(line, format!("duplicate preference {s} {a}")));
                    }
                }
                _ => return Err(format_err(line, format!("unrecognised line `{trimmed}`"))),
            }
        }
        let last = text.lines().count().max(1);
        Ok(FeedbackScenario {
            env: env.ok_or_else(|| format_err(last, "missing `env`"))?,
            intent: intent.ok_or_else(|| format_err(last, "missing `intent`"))?,
            params,
            preferred,
        })
    }
}
