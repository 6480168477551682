//! A small action language with static and dynamic causal laws.
//!
//! Descriptions are parsed from text (see [`parse_action_description`]),
//! grounded at parse time, and interpreted as a deterministic transition
//! system: effects of triggered dynamic laws, universal inertia for every
//! other fluent, and closure under static laws.

mod parse;
mod print;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::ids::ActionId;

pub use parse::parse_action_description;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionLangError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("undeclared symbol `{name}` at {line}:{col}")]
    Undeclared {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("domain violation at {line}:{col}: {message}")]
    DomainViolation {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("duplicate declaration of `{name}` at {line}:{col}")]
    Duplicate {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("fluent `{fluent}` forced to two values")]
    Inconsistent { fluent: String },
    #[error("action `{action}` has conflicting effects on fluent `{fluent}`")]
    ConflictingEffects { action: String, fluent: String },
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("fluent `{0}` is not determined by the given condition")]
    Underdetermined(String),
    #[error("state does not match the fluent signature")]
    MalformedState,
}

pub type Result<T> = std::result::Result<T, ActionLangError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FluentId(pub usize);

/// A domain element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Sym(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Domain {
    Bool,
    /// Inclusive integer range.
    Range {
        lo: i64,
        hi: i64,
    },
    Enum(Vec<Value>),
}

impl Domain {
    pub fn len(&self) -> usize {
        match self {
            Domain::Bool => 2,
            Domain::Range { lo, hi } => (hi - lo + 1).max(0) as usize,
            Domain::Enum(values) => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value at position `index`; `false` precedes `true` for Booleans.
    pub fn value(&self, index: u32) -> Option<Value> {
        let index = index as usize;
        if index >= self.len() {
            return None;
        }
        Some(match self {
            Domain::Bool => Value::Bool(index == 1),
            Domain::Range { lo, .. } => Value::Int(lo + index as i64),
            Domain::Enum(values) => values[index].clone(),
        })
    }

    pub fn index_of(&self, value: &Value) -> Option<u32> {
        match (self, value) {
            (Domain::Bool, Value::Bool(b)) => Some(u32::from(*b)),
            (Domain::Range { lo, hi }, Value::Int(i)) if lo <= i && i <= hi => {
                Some((i - lo) as u32)
            }
            (Domain::Enum(values), v) => values.iter().position(|x| x == v).map(|p| p as u32),
            _ => None,
        }
    }

    pub fn values(&self) -> impl Iterator<Item = Value> + '_ {
        (0..self.len() as u32).filter_map(|i| self.value(i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FluentDecl {
    pub name: String,
    pub domain: Domain,
}

/// `f = v`, with `v` stored as an index into the fluent's domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FluentAtom {
    pub fluent: FluentId,
    pub value: u32,
}

/// `head if body`: whenever the body holds, so does the head.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StaticLaw {
    pub head: FluentAtom,
    pub body: Vec<FluentAtom>,
}

/// `action causes effect if preconditions`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DynamicLaw {
    pub action: ActionId,
    pub effect: FluentAtom,
    pub preconditions: Vec<FluentAtom>,
}

/// Partial assignment of fluents, used for conditions and closure.
pub type PartialState = BTreeMap<FluentId, u32>;

/// A total assignment: one domain index per declared fluent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WorldState(Vec<u32>);

impl WorldState {
    pub fn from_indices(values: Vec<u32>) -> Self {
        WorldState(values)
    }

    pub fn get(&self, fluent: FluentId) -> u32 {
        self.0[fluent.0]
    }

    pub fn holds(&self, atom: &FluentAtom) -> bool {
        self.0.get(atom.fluent.0) == Some(&atom.value)
    }

    pub fn satisfies(&self, condition: &PartialState) -> bool {
        condition.iter().all(|(f, v)| self.0.get(f.0) == Some(v))
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A finite set of ground causal laws over declared fluents and actions.
#[derive(Debug, Clone, Default)]
pub struct ActionDescription {
    fluents: Vec<FluentDecl>,
    actions: Vec<String>,
    statics: Vec<StaticLaw>,
    dynamics: Vec<DynamicLaw>,
    // (action, first precondition) -> dynamic law indices; laws without
    // preconditions are keyed by action alone.
    by_trigger: HashMap<(ActionId, FluentAtom), Vec<usize>>,
    unconditional: HashMap<ActionId, Vec<usize>>,
}

impl PartialEq for ActionDescription {
    fn eq(&self, other: &Self) -> bool {
        self.fluents == other.fluents
            && self.actions == other.actions
            && self.statics == other.statics
            && self.dynamics == other.dynamics
    }
}

impl ActionDescription {
    /// Assembles a description from already-validated parts.
    pub fn new(
        fluents: Vec<FluentDecl>,
        actions: Vec<String>,
        statics: Vec<StaticLaw>,
        dynamics: Vec<DynamicLaw>,
    ) -> Self {
        let mut desc = ActionDescription {
            fluents,
            actions,
            statics,
            dynamics,
            by_trigger: HashMap::new(),
            unconditional: HashMap::new(),
        };
        desc.reindex();
        desc
    }

    fn reindex(&mut self) {
        self.by_trigger.clear();
        self.unconditional.clear();
        for (i, law) in self.dynamics.iter().enumerate() {
            match law.preconditions.first() {
                Some(first) => self
                    .by_trigger
                    .entry((law.action, *first))
                    .or_default()
                    .push(i),
                None => self.unconditional.entry(law.action).or_default().push(i),
            }
        }
    }

    pub fn fluents(&self) -> &[FluentDecl] {
        &self.fluents
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn statics(&self) -> &[StaticLaw] {
        &self.statics
    }

    pub fn dynamics(&self) -> &[DynamicLaw] {
        &self.dynamics
    }

    pub fn fluent_id(&self, name: &str) -> Option<FluentId> {
        self.fluents
            .iter()
            .position(|f| f.name == name)
            .map(FluentId)
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a == name).map(ActionId)
    }

    pub fn action_name(&self, action: ActionId) -> &str {
        &self.actions[action.0]
    }

    pub fn fluent(&self, id: FluentId) -> &FluentDecl {
        &self.fluents[id.0]
    }

    /// Builds an atom from a fluent name and a domain value.
    pub fn atom(&self, fluent: &str, value: &Value) -> Option<FluentAtom> {
        let id = self.fluent_id(fluent)?;
        let value = self.fluents[id.0].domain.index_of(value)?;
        Some(FluentAtom { fluent: id, value })
    }

    pub fn atom_value(&self, atom: &FluentAtom) -> Value {
        self.fluents[atom.fluent.0]
            .domain
            .value(atom.value)
            .expect("atom value within its domain")
    }

    /// Least fixpoint of forward application of the static laws.
    pub fn closure(&self, partial: &PartialState) -> Result<PartialState> {
        closure(partial, &self.statics, |f| self.fluents[f.0].name.clone())
    }

    /// Extends a condition to the unique closed total state it determines.
    pub fn complete(&self, condition: &PartialState) -> Result<WorldState> {
        let closed = self.closure(condition)?;
        let mut values = Vec::with_capacity(self.fluents.len());
        for (i, decl) in self.fluents.iter().enumerate() {
            match closed.get(&FluentId(i)) {
                Some(v) => values.push(*v),
                None => return Err(ActionLangError::Underdetermined(decl.name.clone())),
            }
        }
        Ok(WorldState(values))
    }

    /// Whether a total state is well formed and closed under the static laws.
    pub fn is_state(&self, state: &WorldState) -> bool {
        state.len() == self.fluents.len()
            && state
                .0
                .iter()
                .zip(&self.fluents)
                .all(|(v, decl)| (*v as usize) < decl.domain.len())
            && self
                .statics
                .iter()
                .all(|law| !law.body.iter().all(|a| state.holds(a)) || state.holds(&law.head))
    }

    /// Dynamic laws for `action` whose preconditions hold in `state`.
    pub fn triggered<'a>(
        &'a self,
        state: &'a WorldState,
        action: ActionId,
    ) -> impl Iterator<Item = &'a DynamicLaw> + 'a {
        let keyed = (0..state.len()).flat_map(move |f| {
            let key = (
                action,
                FluentAtom {
                    fluent: FluentId(f),
                    value: state.0[f],
                },
            );
            self.by_trigger.get(&key).into_iter().flatten()
        });
        self.unconditional
            .get(&action)
            .into_iter()
            .flatten()
            .chain(keyed)
            .map(move |&i| &self.dynamics[i])
            .filter(move |law| law.preconditions.iter().all(|a| state.holds(a)))
    }

    /// Successor of `state` under `action`.
    ///
    /// Effects of triggered dynamic laws are fixed first and closed under the
    /// static laws; every other fluent keeps its value unless a static law
    /// whose body holds in the new state forces it.
    pub fn apply(&self, state: &WorldState, action: ActionId) -> Result<WorldState> {
        if action.0 >= self.actions.len() {
            return Err(ActionLangError::UnknownAction(format!("#{}", action.0)));
        }
        if state.len() != self.fluents.len() {
            return Err(ActionLangError::MalformedState);
        }
        let mut effects = PartialState::new();
        for law in self.triggered(state, action) {
            let FluentAtom { fluent, value } = law.effect;
            match effects.insert(fluent, value) {
                Some(previous) if previous != value => {
                    return Err(ActionLangError::ConflictingEffects {
                        action: self.actions[action.0].clone(),
                        fluent: self.fluents[fluent.0].name.clone(),
                    })
                }
                _ => {}
            }
        }
        if effects.is_empty() && self.statics.is_empty() {
            return Ok(state.clone());
        }
        let fixed = self.closure(&effects)?;
        let mut next = state.clone();
        let mut pinned = vec![false; self.fluents.len()];
        for (f, v) in &fixed {
            next.0[f.0] = *v;
            pinned[f.0] = true;
        }
        loop {
            let mut changed = false;
            for law in &self.statics {
                if !law.body.iter().all(|a| next.holds(a)) {
                    continue;
                }
                let f = law.head.fluent.0;
                if next.0[f] == law.head.value {
                    pinned[f] = true;
                    continue;
                }
                if pinned[f] {
                    return Err(ActionLangError::Inconsistent {
                        fluent: self.fluents[f].name.clone(),
                    });
                }
                next.0[f] = law.head.value;
                pinned[f] = true;
                changed = true;
            }
            if !changed {
                return Ok(next);
            }
        }
    }

    /// Applies `action` by name.
    pub fn apply_named(&self, state: &WorldState, action: &str) -> Result<WorldState> {
        let id = self
            .action_id(action)
            .ok_or_else(|| ActionLangError::UnknownAction(action.to_string()))?;
        self.apply(state, id)
    }

    /// Parses a comma-separated condition such as `Loc=1, ~Done`.
    pub fn parse_condition(&self, text: &str) -> Result<PartialState> {
        parse::parse_condition(self, text)
    }

    pub fn format_atom(&self, atom: &FluentAtom) -> String {
        print::format_atom(self, atom)
    }

    pub fn format_state(&self, state: &WorldState) -> String {
        state
            .0
            .iter()
            .enumerate()
            .map(|(f, v)| {
                self.format_atom(&FluentAtom {
                    fluent: FluentId(f),
                    value: *v,
                })
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Closure of `partial` under `statics`. Errors if a law forces a fluent that
/// already holds a different value.
pub fn closure(
    partial: &PartialState,
    statics: &[StaticLaw],
    fluent_name: impl Fn(FluentId) -> String,
) -> Result<PartialState> {
    let mut closed = partial.clone();
    loop {
        let mut changed = false;
        for law in statics {
            let fires = law
                .body
                .iter()
                .all(|a| closed.get(&a.fluent) == Some(&a.value));
            if !fires {
                continue;
            }
            match closed.get(&law.head.fluent) {
                None => {
                    closed.insert(law.head.fluent, law.head.value);
                    changed = true;
                }
                Some(v) if *v == law.head.value => {}
                Some(_) => {
                    return Err(ActionLangError::Inconsistent {
                        fluent: fluent_name(law.head.fluent),
                    })
                }
            }
        }
        if !changed {
            return Ok(closed);
        }
    }
}

#[cfg(test)]
mod tests;
