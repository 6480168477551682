use std::cmp::Ordering;
use std::collections::HashMap;

use super::{AvailabilityFragment, Plan, PlanError, PlanStep};
use crate::action_lang::{ActionDescription, PartialState, WorldState};
use crate::ids::ActionId;

#[derive(Debug, Clone)]
struct Entry {
    // Timestamps of executed actions on the best path to this node.
    stamps: Vec<u32>,
    // Predecessor in the previous layer and the action taken (None = skip).
    back: Option<(usize, Option<ActionId>)>,
}

fn better(a: &[u32], b: &[u32]) -> bool {
    match a.len().cmp(&b.len()) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a < b,
    }
}

/// Layered search over the timestamped graph, one layer per timestamp.
///
/// Layer `t` holds, for every state reachable before timestamp `t`, the
/// best path reaching it: fewest actions, then lexicographically earliest
/// action timestamps. Appending the same step to two paths preserves their
/// order, so keeping one entry per state and layer is exact.
pub struct PlanSearch<'d> {
    description: &'d ActionDescription,
    states: Vec<WorldState>,
    index: HashMap<WorldState, usize>,
    layers: Vec<Vec<Option<Entry>>>,
    transitions: HashMap<(usize, ActionId), usize>,
}

impl<'d> PlanSearch<'d> {
    pub fn new(description: &'d ActionDescription, initial: WorldState) -> Self {
        let mut search = PlanSearch {
            description,
            states: Vec::new(),
            index: HashMap::new(),
            layers: Vec::new(),
            transitions: HashMap::new(),
        };
        let start = search.intern(initial);
        let mut layer = vec![None; start + 1];
        layer[start] = Some(Entry {
            stamps: Vec::new(),
            back: None,
        });
        search.layers.push(layer);
        search
    }

    fn intern(&mut self, state: WorldState) -> usize {
        if let Some(&i) = self.index.get(&state) {
            return i;
        }
        let i = self.states.len();
        self.index.insert(state.clone(), i);
        self.states.push(state);
        i
    }

    /// Number of timestamps searched so far.
    pub fn horizon(&self) -> usize {
        self.layers.len() - 1
    }

    fn successor(&mut self, from: usize, action: ActionId) -> Result<usize, PlanError> {
        if let Some(&to) = self.transitions.get(&(from, action)) {
            return Ok(to);
        }
        let next = self.description.apply(&self.states[from], action)?;
        let to = self.intern(next);
        self.transitions.insert((from, action), to);
        Ok(to)
    }

    /// Adds the next timestamp using its availability facts.
    pub fn extend(&mut self, fragment: &AvailabilityFragment) -> Result<(), PlanError> {
        let t = self.layers.len() as u32;
        let current = self.layers.last().expect("initial layer").clone();
        let mut next: Vec<Option<Entry>> = vec![None; self.states.len()];
        let offer = |next: &mut Vec<Option<Entry>>, at: usize, entry: Entry| {
            if next.len() <= at {
                next.resize(at + 1, None);
            }
            match &next[at] {
                Some(existing) if !better(&entry.stamps, &existing.stamps) => {}
                _ => next[at] = Some(entry),
            }
        };
        for (i, slot) in current.iter().enumerate() {
            let Some(entry) = slot else { continue };
            offer(
                &mut next,
                i,
                Entry {
                    stamps: entry.stamps.clone(),
                    back: Some((i, None)),
                },
            );
            if let Some(&action) = fragment.get(&self.states[i]) {
                let to = self.successor(i, action)?;
                let mut stamps = entry.stamps.clone();
                stamps.push(t);
                offer(
                    &mut next,
                    to,
                    Entry {
                        stamps,
                        back: Some((i, Some(action))),
                    },
                );
            }
        }
        self.layers.push(next);
        Ok(())
    }

    /// Best plan reaching `goal` within the current horizon.
    pub fn best_plan(&self, goal: &PartialState) -> Option<Plan> {
        let last = self.layers.last()?;
        let mut best: Option<(usize, &Entry)> = None;
        for (i, slot) in last.iter().enumerate() {
            let Some(entry) = slot else { continue };
            if !self.states[i].satisfies(goal) {
                continue;
            }
            if best.is_none_or(|(_, b)| better(&entry.stamps, &b.stamps)) {
                best = Some((i, entry));
            }
        }
        let (goal_index, entry) = best?;
        let end = entry.stamps.last().copied().unwrap_or(0) as usize;

        // Walk back from the final layer to the initial state.
        let mut path = Vec::with_capacity(self.layers.len());
        let mut at = goal_index;
        for layer in (1..self.layers.len()).rev() {
            let (prev, action) = self.layers[layer][at]
                .as_ref()
                .and_then(|e| e.back)
                .expect("back pointer on every non-initial entry");
            path.push(PlanStep {
                timestamp: layer,
                state: self.states[prev].clone(),
                action,
            });
            at = prev;
        }
        path.reverse();
        path.truncate(end);
        Some(Plan {
            initial: self.states[at].clone(),
            steps: path,
            terminal: self.states[goal_index].clone(),
        })
    }
}
