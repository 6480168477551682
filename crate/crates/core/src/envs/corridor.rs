use super::{AgentView, EnvError, Environment, Layout, PreferenceMap, StepOutcome, SymbolicModel};
use crate::action_lang::Value;
use crate::feedback::Intent;
use crate::ids::{ActionId, StateId};

const ACTIONS: [&str; 2] = ["moveleft", "moveright"];
const MAX_LEN: usize = 1 << 12;

/// Cells `1..=len` in a row; start at 1, goal at `len`. State id `loc - 1`.
#[derive(Debug, Clone)]
pub struct Corridor {
    len: usize,
    symbolic: SymbolicModel,
}

impl Corridor {
    pub fn new(len: usize) -> Result<Self, EnvError> {
        if !(2..=MAX_LEN).contains(&len) {
            return Err(EnvError::Format {
                what: "corridor",
                line: 1,
                message: format!("length must be 2..={MAX_LEN}"),
            });
        }
        let text = format!(
            "fluent Loc : 1..{len}.\n\
             action moveleft, moveright.\n\
             moveleft causes Loc=L-1 if Loc=L.\n\
             moveright causes Loc=L+1 if Loc=L.\n"
        );
        let assignments: Vec<_> = (0..len)
            .map(|i| (StateId(i), vec![("Loc", Value::Int(i as i64 + 1))]))
            .collect();
        let planning: Vec<StateId> = (0..len - 1).map(StateId).collect();
        let symbolic = SymbolicModel::build(
            text,
            len,
            &assignments,
            &[("Loc", Value::Int(1))],
            &[("Loc", Value::Int(len as i64))],
            &planning,
        )?;
        Ok(Corridor { len, symbolic })
    }
}

impl Environment for Corridor {
    fn name(&self) -> &str {
        "corridor"
    }

    fn n_states(&self) -> usize {
        self.len
    }

    fn action_names(&self) -> &[&'static str] {
        &ACTIONS
    }

    fn reset(&self) -> StateId {
        StateId(0)
    }

    fn step(&self, state: StateId, action: ActionId) -> Result<StepOutcome, EnvError> {
        if state.0 >= self.len {
            return Err(EnvError::InvalidState(state));
        }
        if self.is_terminal(state) {
            return Err(EnvError::Terminal(state));
        }
        let next = match action.0 {
            0 => state.0.saturating_sub(1),
            1 => state.0 + 1,
            _ => return Err(EnvError::InvalidAction(action)),
        };
        let terminal = next == self.len - 1;
        Ok(StepOutcome {
            next: StateId(next),
            reward: if terminal { 4.0 } else { -1.0 },
            terminal,
        })
    }

    fn is_terminal(&self, state: StateId) -> bool {
        state.0 == self.len - 1
    }

    fn states(&self) -> Vec<StateId> {
        (0..self.len - 1).map(StateId).collect()
    }

    fn episode_cap(&self) -> usize {
        20 * self.len
    }

    fn symbolic(&self) -> &SymbolicModel {
        &self.symbolic
    }

    fn layout(&self) -> Layout {
        let mut row = ".".repeat(self.len - 1);
        row.push('G');
        Layout {
            rows: 1,
            cols: self.len,
            cells: vec![row],
            blocked_edges: Vec::new(),
            landmarks: Vec::new(),
            actions: ACTIONS.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn view(&self, state: StateId) -> Result<AgentView, EnvError> {
        if state.0 >= self.len {
            return Err(EnvError::InvalidState(state));
        }
        Ok(AgentView {
            row: 0,
            col: state.0,
            passenger: None,
        })
    }

    fn preferences(&self, intent: Intent) -> PreferenceMap {
        let preferred = match intent {
            Intent::Helpful => ActionId(1),
            Intent::Misleading => ActionId(0),
        };
        self.states()
            .into_iter()
            .map(|s| (s, vec![preferred]))
            .collect()
    }
}
