//! Deterministic tabular environments with symbolic exports.
//!
//! Every environment exposes a dense [`StateId`] space, a fixed action list
//! whose order matches the exported action description, and the mapping
//! between environment states and symbolic world states.

mod corridor;
mod four_rooms;
mod grid;
mod taxi;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::action_lang::{
    parse_action_description, ActionDescription, ActionLangError, PartialState, Value, WorldState,
};
use crate::feedback::Intent;
use crate::ids::{ActionId, StateId};

pub use corridor::Corridor;
pub use four_rooms::{Cell, FourRooms, FourRoomsMap, FourRoomsRewards};
pub use taxi::{Taxi, TaxiInstance, TaxiPhase};

pub const DEFAULT_FOUR_ROOMS_MAP: &str = include_str!("../../data/four_rooms.map");
pub const DEFAULT_TAXI_INSTANCE: &str = include_str!("../../data/taxi.instance");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("state {0} does not exist")]
    InvalidState(StateId),
    #[error("action {0} does not exist")]
    InvalidAction(ActionId),
    #[error("state {0} is terminal")]
    Terminal(StateId),
    #[error("{what} line {line}: {message}")]
    Format {
        what: &'static str,
        line: usize,
        message: String,
    },
    #[error("unknown environment `{0}`")]
    UnknownEnv(String),
    #[error("symbolic export: {0}")]
    Lang(#[from] ActionLangError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: StateId,
    pub reward: f64,
    pub terminal: bool,
}

/// Actions a trainer prefers in each non-terminal state.
pub type PreferenceMap = BTreeMap<StateId, Vec<ActionId>>;

/// Static picture of an environment for display.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Layout {
    pub rows: usize,
    pub cols: usize,
    /// One string per row: `#` wall, `.` free, `X` danger, `G` goal.
    pub cells: Vec<String>,
    /// Blocked edges between adjacent cells, `[r1, c1, r2, c2]`.
    pub blocked_edges: Vec<[usize; 4]>,
    pub landmarks: Vec<Landmark>,
    pub actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Landmark {
    pub name: String,
    pub row: usize,
    pub col: usize,
}

/// Where the agent is in a given state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct AgentView {
    pub row: usize,
    pub col: usize,
    /// Taxi only: `waiting`, `riding` or `delivered`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passenger: Option<String>,
}

pub trait Environment: Send + Sync {
    fn name(&self) -> &str;
    /// Size of the state id space; some ids may be unreachable.
    fn n_states(&self) -> usize;
    fn action_names(&self) -> &[&'static str];
    fn n_actions(&self) -> usize {
        self.action_names().len()
    }
    fn reset(&self) -> StateId;
    fn step(&self, state: StateId, action: ActionId) -> Result<StepOutcome, EnvError>;
    fn is_terminal(&self, state: StateId) -> bool;
    /// Reachable non-terminal states in increasing id order.
    fn states(&self) -> Vec<StateId>;
    fn episode_cap(&self) -> usize;
    fn symbolic(&self) -> &SymbolicModel;
    fn layout(&self) -> Layout;
    fn view(&self, state: StateId) -> Result<AgentView, EnvError>;
    fn preferences(&self, intent: Intent) -> PreferenceMap;
    fn state_label(&self, state: StateId) -> String {
        match self.view(state) {
            Ok(AgentView {
                row,
                col,
                passenger: Some(p),
            }) => format!("({row},{col}) {p}"),
            Ok(AgentView { row, col, .. }) => format!("({row},{col})"),
            Err(_) => format!("#{}", state.0),
        }
    }
}

/// The action-language view of an environment and its state mapping.
#[derive(Debug, Clone)]
pub struct SymbolicModel {
    text: String,
    description: ActionDescription,
    initial: PartialState,
    goal: PartialState,
    world: Vec<Option<WorldState>>,
    ids: HashMap<WorldState, StateId>,
    planning_states: Vec<WorldState>,
}

impl SymbolicModel {
    /// Parses `text` and maps each listed state id to the world state its
    /// fluent assignment determines. `planning_states` are the ids over which
    /// the planner samples availability.
    pub(crate) fn build(
        text: String,
        n_states: usize,
        assignments: &[(StateId, Vec<(&str, Value)>)],
        initial: &[(&str, Value)],
        goal: &[(&str, Value)],
        planning_states: &[StateId],
    ) -> Result<Self, EnvError> {
        let description = parse_action_description(&text)?;
        let condition = |pairs: &[(&str, Value)]| -> Result<PartialState, EnvError> {
            let mut out = PartialState::new();
            for (name, value) in pairs {
                let atom = description
                    .atom(name, value)
                    .ok_or_else(|| ActionLangError::Underdetermined(format!("{name}={value:?}")))?;
                out.insert(atom.fluent, atom.value);
            }
            Ok(out)
        };
        let mut world = vec![None; n_states];
        let mut ids = HashMap::new();
        for (id, pairs) in assignments {
            let state = description.complete(&condition(pairs)?)?;
            ids.insert(state.clone(), *id);
            world[id.0] = Some(state);
        }
        let planning_states = planning_states
            .iter()
            .filter_map(|s| world[s.0].clone())
            .collect();
        Ok(SymbolicModel {
            initial: condition(initial)?,
            goal: condition(goal)?,
            text,
            description,
            world,
            ids,
            planning_states,
        })
    }

    /// The generated action-language source.
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn description(&self) -> &ActionDescription {
        &self.description
    }

    pub fn initial(&self) -> &PartialState {
        &self.initial
    }

    pub fn goal(&self) -> &PartialState {
        &self.goal
    }

    pub fn world_state(&self, state: StateId) -> Option<&WorldState> {
        self.world.get(state.0).and_then(Option::as_ref)
    }

    pub fn state_id(&self, world: &WorldState) -> Option<StateId> {
        self.ids.get(world).copied()
    }

    pub fn planning_states(&self) -> &[WorldState] {
        &self.planning_states
    }
}

/// Non-terminal states reachable from the reset state, by breadth-first
/// search over [`Environment::step`].
pub fn reachable_states<E: Environment + ?Sized>(env: &E) -> Vec<StateId> {
    let mut seen = vec![false; env.n_states()];
    let start = env.reset();
    seen[start.0] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        if env.is_terminal(s) {
            continue;
        }
        for a in 0..env.n_actions() {
            if let Ok(out) = env.step(s, ActionId(a)) {
                if !std::mem::replace(&mut seen[out.next.0], true) {
                    queue.push_back(out.next);
                }
            }
        }
    }
    (0..seen.len())
        .filter(|&i| seen[i] && !env.is_terminal(StateId(i)))
        .map(StateId)
        .collect()
}

/// Environments selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    FourRooms,
    Taxi,
    Corridor,
}

impl EnvKind {
    pub fn parse(name: &str) -> Result<Self, EnvError> {
        match name {
            "four_rooms" | "fourrooms" => Ok(EnvKind::FourRooms),
            "taxi" => Ok(EnvKind::Taxi),
            "corridor" => Ok(EnvKind::Corridor),
            other => Err(EnvError::UnknownEnv(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::FourRooms => "four_rooms",
            EnvKind::Taxi => "taxi",
            EnvKind::Corridor => "corridor",
        }
    }
}

/// Builds an environment from its default data, or from `source` when given
/// (a map file for Four Rooms, an instance file for Taxi, a length for the
/// corridor).
pub fn build_env(kind: EnvKind, source: Option<&str>) -> Result<Box<dyn Environment>, EnvError> {
    Ok(match kind {
        EnvKind::FourRooms => {
            let map = FourRoomsMap::parse(source.unwrap_or(DEFAULT_FOUR_ROOMS_MAP))?;
            Box::new(FourRooms::new(map, FourRoomsRewards::default())?)
        }
        EnvKind::Taxi => {
            let instance = TaxiInstance::parse(source.unwrap_or(DEFAULT_TAXI_INSTANCE))?;
            Box::new(Taxi::new(instance)?)
        }
        EnvKind::Corridor => {
            let len = match source {
                Some(s) => s.trim().parse().map_err(|_| EnvError::Format {
                    what: "corridor",
                    line: 1,
                    message: format!("bad length `{}`", s.trim()),
                })?,
                None => 3,
            };
            Box::new(Corridor::new(len)?)
        }
    })
}

#[cfg(test)]
mod tests;
