use std::time::Duration;

use super::FeedbackError;

/// Feedback older than this, relative to when its step was shown, is
/// dropped.
pub const DEFAULT_WINDOW: Duration = Duration::from_secs(1);

/// Outcome of submitting live feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Attribution {
    /// Attached to the given step, replacing `previous` if there was one.
    Accepted { step: u64, previous: Option<f64> },
    /// No step on screen, the window has passed, or the step was already
    /// learned from.
    Dropped,
}

#[derive(Debug, Clone, Copy)]
struct Shown {
    step: u64,
    at: Duration,
    value: Option<f64>,
    consumed: bool,
}

/// Attributes human feedback to the most recently displayed step.
///
/// Times are passed in by the caller, measured from any fixed origin.
#[derive(Debug, Clone)]
pub struct LiveFeedback {
    window: Duration,
    shown: Option<Shown>,
    accepted: u64,
    dropped: u64,
}

impl Default for LiveFeedback {
    fn default() -> Self {
        LiveFeedback::new(DEFAULT_WINDOW)
    }
}

impl LiveFeedback {
    pub fn new(window: Duration) -> Self {
        LiveFeedback {
            window,
            shown: None,
            accepted: 0,
            dropped: 0,
        }
    }

    /// A new step is on screen; feedback now refers to it.
    pub fn show(&mut self, step: u64, now: Duration) {
        self.shown = Some(Shown {
            step,
            at: now,
            value: None,
            consumed: false,
        });
    }

    pub fn submit(&mut self, value: f64, now: Duration) -> Result<Attribution, FeedbackError> {
        if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
            return Err(FeedbackError::Value(value));
        }
        match &mut self.shown {
            Some(shown) if !shown.consumed && now >= shown.at && now - shown.at <= self.window => {
                let previous = shown.value.replace(value);
                if previous.is_none() {
                    self.accepted += 1;
                }
                Ok(Attribution::Accepted {
                    step: shown.step,
                    previous,
                })
            }
            _ => {
                self.dropped += 1;
                Ok(Attribution::Dropped)
            }
        }
    }

    /// Feedback for `step`, if any; afterwards the step accepts no more.
    pub fn take(&mut self, step: u64) -> Option<f64> {
        match &mut self.shown {
            Some(shown) if shown.step == step => {
                shown.consumed = true;
                shown.value.take()
            }
            _ => None,
        }
    }

    /// Steps that received feedback.
    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
