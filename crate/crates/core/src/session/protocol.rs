//! Versioned JSON messages exchanged with a trainer client.
//!
//! Every message is an object `{"v": 1, "seq": n, "kind": ..., "payload": ...}`.
//! Server messages carry a gapless per-session `seq` starting at 1; client
//! messages may omit it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actor_critic::TableSnapshot;
use crate::envs::AgentView;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("`{0}` messages are sent by the server only")]
    Direction(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(flatten)]
    pub message: Message,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Message {
    StateUpdate(StateUpdate),
    PlanUpdate(PlanUpdate),
    Feedback(FeedbackMessage),
    Control(Control),
    Snapshot(Snapshot),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::StateUpdate(_) => "state_update",
            Message::PlanUpdate(_) => "plan_update",
            Message::Feedback(_) => "feedback",
            Message::Control(_) => "control",
            Message::Snapshot(_) => "snapshot",
        }
    }
}

/// One executed transition, or the end of an episode without one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateUpdate {
    pub episode: usize,
    /// Session-wide step counter; feedback refers to this number.
    pub step: u64,
    /// Position within the episode, from 1.
    pub episode_step: usize,
    pub state: usize,
    pub agent: AgentView,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    pub reward: f64,
    pub next_state: usize,
    pub next_agent: AgentView,
    pub episode_return: f64,
    /// The episode is over after this update.
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedStep {
    pub timestamp: usize,
    pub state: usize,
    pub agent: AgentView,
    /// `None` for a skipped timestamp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanUpdate {
    pub episode: usize,
    pub found: bool,
    pub steps: Vec<PlannedStep>,
}

/// Server to client: the fate of a feedback submission. Client to server:
/// a submission, with `value` and optionally `client_time_ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackMessage {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_time_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<bool>,
    /// Step the feedback was attached to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl FeedbackMessage {
    pub fn submit(value: f64) -> Self {
        FeedbackMessage {
            value,
            client_time_ms: None,
            accepted: None,
            step: None,
            reason: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Control {
    Pause,
    Resume,
    /// Step-on-demand pacing: advance one step.
    Step,
    /// Timed pacing with the given interval.
    Speed {
        interval_ms: u64,
    },
    /// Switch to step-on-demand pacing.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub episode: usize,
    pub step: u64,
    pub returns: Vec<f64>,
    pub feedback_accepted: u64,
    pub feedback_dropped: u64,
    pub tables: Vec<TableSnapshot>,
}

impl Envelope {
    pub fn new(seq: u64, message: Message) -> Self {
        Envelope {
            v: PROTOCOL_VERSION,
            seq: Some(seq),
            message,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("messages always serialise")
    }

    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        let env: Envelope =
            serde_json::from_str(text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        if env.v != PROTOCOL_VERSION {
            return Err(ProtocolError::Version(env.v));
        }
        Ok(env)
    }
}

/// What a client may send.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Feedback {
        value: f64,
        client_time_ms: Option<u64>,
    },
    Control(Control),
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, ProtocolError> {
        match Envelope::parse(text)?.message {
            Message::Feedback(f) => Ok(ClientMessage::Feedback {
                value: f.value,
                client_time_ms: f.client_time_ms,
            }),
            Message::Control(c) => Ok(ClientMessage::Control(c)),
            other => Err(ProtocolError::Direction(other.kind())),
        }
    }

    pub fn to_json(&self) -> String {
        let message = match *self {
            ClientMessage::Feedback {
                value,
                client_time_ms,
            } => Message::Feedback(FeedbackMessage {
                client_time_ms,
                ..FeedbackMessage::submit(value)
            }),
            ClientMessage::Control(c) => Message::Control(c),
        };
        Envelope {
            v: PROTOCOL_VERSION,
            seq: None,
            message,
        }
        .to_json()
    }
}
