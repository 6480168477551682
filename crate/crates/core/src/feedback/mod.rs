//! Trainer feedback: simulated oracles built from per-state preferred
//! actions, and a live channel that attributes human input to the step on
//! screen.

mod live;
mod scenario;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ActionId, StateId};

pub use live::{Attribution, LiveFeedback, DEFAULT_WINDOW};
pub use scenario::{build_scenario, FeedbackScenario};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeedbackError {
    #[error("scenario line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("probability {name} = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("feedback value {0} outside [-1, 1]")]
    Value(f64),
    #[error("scenario has no preferences for state {0}")]
    Uncovered(StateId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Helpful,
    Misleading,
}

impl Intent {
    pub fn as_str(self) -> &'static str {
        match self {
            Intent::Helpful => "helpful",
            Intent::Misleading => "misleading",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "helpful" => Some(Intent::Helpful),
            "misleading" => Some(Intent::Misleading),
            _ => None,
        }
    }
}

/// The four trainer reliability settings: feedback on every step or on
/// half of them, with or without 30% sign flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackCase {
    Ideal,
    Infrequent,
    Inconsistent,
    InfrequentInconsistent,
}

impl FeedbackCase {
    pub const ALL: [FeedbackCase; 4] = [
        FeedbackCase::Ideal,
        FeedbackCase::Infrequent,
        FeedbackCase::Inconsistent,
        FeedbackCase::InfrequentInconsistent,
    ];

    pub fn params(self) -> FeedbackParams {
        let (p_give, p_flip) = match self {
            FeedbackCase::Ideal => (1.0, 0.0),
            FeedbackCase::Infrequent => (0.5, 0.0),
            FeedbackCase::Inconsistent => (1.0, 0.3),
            FeedbackCase::InfrequentInconsistent => (0.5, 0.3),
        };
        FeedbackParams { p_give, p_flip }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackCase::Ideal => "ideal",
            FeedbackCase::Infrequent => "infrequent",
            FeedbackCase::Inconsistent => "inconsistent",
            FeedbackCase::InfrequentInconsistent => "infrequent_inconsistent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// How often the trainer speaks up and how often it gets the sign wrong.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackParams {
    pub p_give: f64,
    pub p_flip: f64,
}

impl Default for FeedbackParams {
    fn default() -> Self {
        FeedbackCase::Ideal.params()
    }
}

impl FeedbackParams {
    pub fn validate(&self) -> Result<(), FeedbackError> {
        for (name, value) in [("p_give", self.p_give), ("p_flip", self.p_flip)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(FeedbackError::Probability { name, value });
            }
        }
        Ok(())
    }
}

/// One piece of feedback about an executed step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub episode: u64,
    pub step: u64,
    pub state: StateId,
    pub action: ActionId,
    pub value: f64,
}

/// Simulated trainer response to `(s, a)`; `s` must be covered by the
/// scenario.
///
/// Two uniforms are drawn on every call, whether or not feedback is given,
/// so the stream position does not depend on the outcome. With probability
/// `p_give` the trainer answers `+1` for a preferred action and `-1`
/// otherwise, flipped with probability `p_flip`.
pub fn oracle_feedback<R: Rng + ?Sized>(
    scenario: &FeedbackScenario,
    state: StateId,
    action: ActionId,
    rng: &mut R,
) -> Result<Option<f64>, FeedbackError> {
    if !scenario.covers(state) {
        return Err(FeedbackError::Uncovered(state));
    }
    let give: f64 = rng.random();
    let flip: f64 = rng.random();
    if give >= scenario.params.p_give {
        return Ok(None);
    }
    let sign = if scenario.prefers(state, action) {
        1.0
    } else {
        -1.0
    };
    Ok(Some(if flip < scenario.params.p_flip {
        -sign
    } else {
        sign
    }))
}

/// Anything that may comment on an executed step.
pub trait FeedbackSource {
    fn feedback(&mut self, state: StateId, action: ActionId) -> Result<Option<f64>, FeedbackError>;
}

/// A source that never gives feedback.
#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl FeedbackSource for Silent {
    fn feedback(
        &mut self,
        _state: StateId,
        _action: ActionId,
    ) -> Result<Option<f64>, FeedbackError> {
        Ok(None)
    }
}

/// [`oracle_feedback`] with its own random stream.
#[derive(Debug, Clone)]
pub struct Oracle<'a, R> {
    pub scenario: &'a FeedbackScenario,
    pub rng: R,
}

impl<R: Rng> FeedbackSource for Oracle<'_, R> {
    fn feedback(&mut self, state: StateId, action: ActionId) -> Result<Option<f64>, FeedbackError> {
        oracle_feedback(self.scenario, state, action, &mut self.rng)
    }
}
