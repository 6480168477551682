use std::collections::BTreeSet;
use std::fmt::Write;

use super::grid::{bfs, data_lines, descending, offset, MOVES, MOVE_NAMES};
use super::{
    AgentView, EnvError, Environment, Landmark, Layout, PreferenceMap, StepOutcome, SymbolicModel,
};
use crate::action_lang::Value;
use crate::feedback::Intent;
use crate::ids::{ActionId, StateId};

const MAX_SIDE: usize = 32;
const ACTIONS: [&str; 6] = ["north", "south", "east", "west", "pickup", "dropoff"];
const PICKUP: usize = 4;
const DROPOFF: usize = 5;
const RESERVED: [&str; 8] = [
    "taxi", "fluent", "action", "causes", "if", "bool", "true", "false",
];

type Pos = (usize, usize);

/// A Taxi layout with one passenger and one destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxiInstance {
    pub rows: usize,
    pub cols: usize,
    pub landmarks: Vec<(String, Pos)>,
    /// Blocked edges, each stored with the smaller cell first.
    pub walls: BTreeSet<(Pos, Pos)>,
    pub taxi: Pos,
    /// Index into `landmarks`.
    pub passenger: usize,
    pub destination: usize,
    pub traffic: BTreeSet<Pos>,
    pub decoy: Option<Pos>,
    pub episode_cap: usize,
}

fn format_err(line: usize, message: impl Into<String>) -> EnvError {
    EnvError::Format {
        what: "taxi instance",
        line,
        message: message.into(),
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl TaxiInstance {
    /// Line-oriented format:
    ///
    /// ```text
    /// size 5 5
    /// landmark R 0 0
    /// wall 0 1 0 2
    /// taxi 2 2
    /// passenger R
    /// destination B
    /// traffic 1 0
    /// decoy 1 0
    /// episode_cap 400
    /// ```
    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let mut size: Option<(usize, usize)> = None;
        let mut landmarks: Vec<(String, Pos)> = Vec::new();
        let mut walls = BTreeSet::new();
        let mut taxi = None;
        let mut passenger: Option<(usize, String)> = None;
        let mut destination: Option<(usize, String)> = None;
        let mut traffic = BTreeSet::new();
        let mut decoy = None;
        let mut episode_cap = 400;

        let num = |line: usize, s: &str| -> Result<usize, EnvError> {
            s.parse()
                .map_err(|_| format_err(line, format!("expected a number, got `{s}`")))
        };
        for (line, fields) in data_lines(text) {
            let pos = |r: &str, c: &str| -> Result<Pos, EnvError> {
                let (rows, cols) =
                    size.ok_or_else(|| format_err(line, "`size` must come first"))?;
                let p = (num(line, r)?, num(line, c)?);
                if p.0 >= rows || p.1 >= cols {
                    return Err(format_err(line, format!("cell ({r},{c}) outside the grid")));
                }
                Ok(p)
            };
            match fields[..] {
                ["size", r, c] => {
                    if size.is_some() {
                        return Err(format_err(line, "duplicate `size`"));
                    }
                    let (r, c) = (num(line, r)?, num(line, c)?);
                    if r == 0 || c == 0 || r > MAX_SIDE || c > MAX_SIDE {
                        return Err(format_err(line, format!("size must be 1..={MAX_SIDE}")));
                    }
                    size = Some((r, c));
                }
                ["landmark", name, r, c] => {
                    let p = pos(r, c)?;
                    let lower = name.to_lowercase();
                    if !is_ident(name) || RESERVED.contains(&lower.as_str()) {
                        return Err(format_err(line, format!("bad landmark name `{name}`")));
                    }
                    if landmarks.iter().any(|(n, _)| n.to_lowercase() == lower) {
                        return Err(format_err(line, format!("duplicate landmark `{name}`")));
                    }
                    if landmarks.iter().any(|(_, q)| *q == p) {
                        return Err(format_err(line, "two landmarks on one cell"));
                    }
                    landmarks.push((name.to_string(), p));
                }
                ["wall", r1, c1, r2, c2] => {
                    let a = pos(r1, c1)?;
                    let b = pos(r2, c2)?;
                    if a.0.abs_diff(b.0) + a.1.abs_diff(b.1) != 1 {
                        return Err(format_err(line, "wall cells must be adjacent"));
                    }
                    walls.insert((a.min(b), a.max(b)));
                }
                ["taxi", r, c] => {
                    if taxi.replace(pos(r, c)?).is_some() {
                        return Err(format_err(line, "duplicate `taxi`"));
                    }
                }
                ["passenger", name] => {
                    if passenger.replace((line, name.to_string())).is_some() {
                        return Err(format_err(line, "duplicate `passenger`"));
                    }
                }
                ["destination", name] => {
                    if destination.replace((line, name.to_string())).is_some() {
                        return Err(format_err(line, "duplicate `destination`"));
                    }
                }
                ["traffic", r, c] => {
                    traffic.insert(pos(r, c)?);
                }
                ["decoy", r, c] => {
                    if decoy.replace(pos(r, c)?).is_some() {
                        return Err(format_err(line, "duplicate `decoy`"));
                    }
                }
                ["episode_cap", n] => {
                    episode_cap = num(line, n)?;
                    if episode_cap == 0 {
                        return Err(format_err(line, "episode_cap must be positive"));
                    }
                }
                _ => {
                    return Err(format_err(
                        line,
                        format!("unrecognised line `{}`", fields.join(" ")),
                    ))
                }
            }
        }
        let last = text.lines().count().max(1);
        let (rows, cols) = size.ok_or_else(|| format_err(last, "missing `size`"))?;
        let landmark = |entry: Option<(usize, String)>, key: &str| -> Result<usize, EnvError> {
            let (line, name) = entry.ok_or_else(|| format_err(last, format!("missing `{key}`")))?;
            landmarks
                .iter()
                .position(|(n, _)| *n == name)
                .ok_or_else(|| format_err(line, format!("unknown landmark `{name}`")))
        };
        let passenger = landmark(passenger, "passenger")?;
        let destination = landmark(destination, "destination")?;
        if passenger == destination {
            return Err(format_err(last, "passenger already at the destination"));
        }
        Ok(TaxiInstance {
            rows,
            cols,
            taxi: taxi.ok_or_else(|| format_err(last, "missing `taxi`"))?,
            landmarks,
            walls,
            passenger,
            destination,
            traffic,
            decoy,
            episode_cap,
        })
    }

    fn blocked(&self, a: Pos, b: Pos) -> bool {
        self.walls.contains(&(a.min(b), a.max(b)))
    }

    fn target(&self, pos: Pos, action: usize) -> Pos {
        match offset(self.rows, self.cols, pos, MOVES[action]) {
            Some(next) if !self.blocked(pos, next) => next,
            _ => pos,
        }
    }

    fn cells(&self) -> usize {
        self.rows * self.cols
    }

    fn index(&self, (r, c): Pos) -> usize {
        r * self.cols + c
    }

    fn pos(&self, index: usize) -> Pos {
        (index / self.cols, index % self.cols)
    }

    fn symbol(&self, landmark: usize) -> String {
        self.landmarks[landmark].0.to_lowercase()
    }

    /// Distances to `target` over moves, optionally never entering traffic
    /// cells other than the target itself.
    fn distances(&self, target: Pos, avoid_traffic: bool) -> Vec<Option<u32>> {
        let t = self.index(target);
        bfs(self.cells(), &[t], |u| {
            (0..4)
                .map(|a| self.index(self.target(self.pos(u), a)))
                .filter(|&v| {
                    v != u && !(avoid_traffic && v != t && self.traffic.contains(&self.pos(v)))
                })
                .filter(|_| !(avoid_traffic && u != t && self.traffic.contains(&self.pos(u))))
                .collect()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaxiPhase {
    Waiting,
    Riding,
    Delivered,
}

impl TaxiPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            TaxiPhase::Waiting => "waiting",
            TaxiPhase::Riding => "riding",
            TaxiPhase::Delivered => "delivered",
        }
    }
}

/// Pick up the passenger at one landmark and drop them off at another.
/// State id `phase * rows * cols + row * cols + col`.
#[derive(Debug, Clone)]
pub struct Taxi {
    instance: TaxiInstance,
    symbolic: SymbolicModel,
}

pub const STEP_REWARD: f64 = -1.0;
pub const DELIVERY_REWARD: f64 = 20.0;
pub const ILLEGAL_REWARD: f64 = -10.0;

impl Taxi {
    pub fn new(instance: TaxiInstance) -> Result<Self, EnvError> {
        let mut text = String::new();
        let symbols: Vec<String> = (0..instance.landmarks.len())
            .map(|i| instance.symbol(i))
            .collect();
        let _ = writeln!(text, "% taxi {}x{}", instance.rows, instance.cols);
        let _ = writeln!(text, "fluent TaxiRow : 0..{}.", instance.rows - 1);
        let _ = writeln!(text, "fluent TaxiCol : 0..{}.", instance.cols - 1);
        let _ = writeln!(text, "fluent PassLoc : {{{}, taxi}}.", symbols.join(", "));
        let _ = writeln!(text, "action {}.", ACTIONS.join(", "));
        for i in 0..instance.cells() {
            let (r, c) = instance.pos(i);
            for (a, name) in MOVE_NAMES.iter().enumerate() {
                let (nr, nc) = instance.target((r, c), a);
                if nr != r {
                    let _ = writeln!(
                        text,
                        "{name} causes TaxiRow={nr} if TaxiRow={r}, TaxiCol={c}."
                    );
                }
                if nc != c {
                    let _ = writeln!(
                        text,
                        "{name} causes TaxiCol={nc} if TaxiRow={r}, TaxiCol={c}."
                    );
                }
            }
        }
        for (symbol, (_, (r, c))) in symbols.iter().zip(&instance.landmarks) {
            let _ = writeln!(
                text,
                "pickup causes PassLoc=taxi if TaxiRow={r}, TaxiCol={c}, PassLoc={symbol}."
            );
        }
        let (dr, dc) = instance.landmarks[instance.destination].1;
        let _ = writeln!(
            text,
            "dropoff causes PassLoc={} if TaxiRow={dr}, TaxiCol={dc}, PassLoc=taxi.",
            symbols[instance.destination]
        );

        let cells = instance.cells();
        let mut assignments = Vec::new();
        let mut planning = Vec::new();
        for phase in [TaxiPhase::Waiting, TaxiPhase::Riding, TaxiPhase::Delivered] {
            let pass = match phase {
                TaxiPhase::Waiting => symbols[instance.passenger].clone(),
                TaxiPhase::Riding => "taxi".to_string(),
                TaxiPhase::Delivered => symbols[instance.destination].clone(),
            };
            for i in 0..cells {
                let (r, c) = instance.pos(i);
                if phase == TaxiPhase::Delivered && (r, c) != (dr, dc) {
                    continue;
                }
                let id = StateId(phase as usize * cells + i);
                assignments.push((
                    id,
                    vec![
                        ("TaxiRow", Value::Int(r as i64)),
                        ("TaxiCol", Value::Int(c as i64)),
                        ("PassLoc", Value::Sym(pass.clone())),
                    ],
                ));
                if phase != TaxiPhase::Delivered {
                    planning.push(id);
                }
            }
        }
        let (tr, tc) = instance.taxi;
        let symbolic = SymbolicModel::build(
            text,
            3 * cells,
            &assignments,
            &[
                ("TaxiRow", Value::Int(tr as i64)),
                ("TaxiCol", Value::Int(tc as i64)),
                ("PassLoc", Value::Sym(symbols[instance.passenger].clone())),
            ],
            &[("PassLoc", Value::Sym(symbols[instance.destination].clone()))],
            &planning,
        )?;
        Ok(Taxi { instance, symbolic })
    }

    pub fn instance(&self) -> &TaxiInstance {
        &self.instance
    }

    pub fn state_of(&self, pos: Pos, phase: TaxiPhase) -> StateId {
        StateId(phase as usize * self.instance.cells() + self.instance.index(pos))
    }

    pub fn decode(&self, state: StateId) -> Result<(Pos, TaxiPhase), EnvError> {
        let cells = self.instance.cells();
        let phase = match state.0 / cells {
            0 => TaxiPhase::Waiting,
            1 => TaxiPhase::Riding,
            2 => TaxiPhase::Delivered,
            _ => return Err(EnvError::InvalidState(state)),
        };
        let pos = self.instance.pos(state.0 % cells);
        if phase == TaxiPhase::Delivered && pos != self.landmark_pos(self.instance.destination) {
            return Err(EnvError::InvalidState(state));
        }
        Ok((pos, phase))
    }

    fn landmark_pos(&self, landmark: usize) -> Pos {
        self.instance.landmarks[landmark].1
    }

    /// Moves toward `target` along `dist`, falling back to plain distances
    /// from cells the restricted distances do not cover.
    fn toward(&self, pos: Pos, target: Pos, avoid_traffic: bool) -> Vec<usize> {
        let inst = &self.instance;
        let next: Vec<Option<usize>> = (0..4)
            .map(|a| {
                let n = inst.target(pos, a);
                (n != pos).then(|| inst.index(n))
            })
            .collect();
        let here = inst.index(pos);
        if avoid_traffic {
            let moves = descending(&inst.distances(target, true), here, &next);
            if !moves.is_empty() {
                return moves;
            }
        }
        descending(&inst.distances(target, false), here, &next)
    }
}

impl Environment for Taxi {
    fn name(&self) -> &str {
        "taxi"
    }

    fn n_states(&self) -> usize {
        3 * self.instance.cells()
    }

    fn action_names(&self) -> &[&'static str] {
        &ACTIONS
    }

    fn reset(&self) -> StateId {
        self.state_of(self.instance.taxi, TaxiPhase::Waiting)
    }

    fn step(&self, state: StateId, action: ActionId) -> Result<StepOutcome, EnvError> {
        let (pos, phase) = self.decode(state)?;
        if phase == TaxiPhase::Delivered {
            return Err(EnvError::Terminal(state));
        }
        let passenger = self.landmark_pos(self.instance.passenger);
        let destination = self.landmark_pos(self.instance.destination);
        let outcome = |pos, phase, reward, terminal| StepOutcome {
            next: self.state_of(pos, phase),
            reward,
            terminal,
        };
        Ok(match action.0 {
            a @ 0..=3 => outcome(self.instance.target(pos, a), phase, STEP_REWARD, false),
            PICKUP if phase == TaxiPhase::Waiting && pos == passenger => {
                outcome(pos, TaxiPhase::Riding, STEP_REWARD, false)
            }
            DROPOFF if phase == TaxiPhase::Riding && pos == destination => {
                outcome(pos, TaxiPhase::Delivered, DELIVERY_REWARD, true)
            }
            PICKUP | DROPOFF => outcome(pos, phase, ILLEGAL_REWARD, false),
            _ => return Err(EnvError::InvalidAction(action)),
        })
    }

    fn is_terminal(&self, state: StateId) -> bool {
        matches!(self.decode(state), Ok((_, TaxiPhase::Delivered)))
    }

    fn states(&self) -> Vec<StateId> {
        super::reachable_states(self)
    }

    fn episode_cap(&self) -> usize {
        self.instance.episode_cap
    }

    fn symbolic(&self) -> &SymbolicModel {
        &self.symbolic
    }

    fn layout(&self) -> Layout {
        let inst = &self.instance;
        Layout {
            rows: inst.rows,
            cols: inst.cols,
            cells: vec![".".repeat(inst.cols); inst.rows],
            blocked_edges: inst
                .walls
                .iter()
                .map(|(a, b)| [a.0, a.1, b.0, b.1])
                .collect(),
            landmarks: inst
                .landmarks
                .iter()
                .map(|(name, (row, col))| Landmark {
                    name: name.clone(),
                    row: *row,
                    col: *col,
                })
                .collect(),
            actions: ACTIONS.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn view(&self, state: StateId) -> Result<AgentView, EnvError> {
        let ((row, col), phase) = self.decode(state)?;
        Ok(AgentView {
            row,
            col,
            passenger: Some(phase.as_str().to_string()),
        })
    }

    /// Helpful: to the passenger, pick up, to the destination, drop off,
    /// steering around traffic where an equally short route exists.
    /// Misleading: the passenger first claims to wait at the decoy cell, so
    /// pickup is also preferred there; the rest of the route is correct.
    fn preferences(&self, intent: Intent) -> PreferenceMap {
        let passenger = self.landmark_pos(self.instance.passenger);
        let destination = self.landmark_pos(self.instance.destination);
        let mut out = PreferenceMap::new();
        for s in self.states() {
            let (pos, phase) = self.decode(s).expect("enumerated states decode");
            let mut actions = match (phase, intent) {
                (TaxiPhase::Waiting, _) if pos == passenger => vec![PICKUP],
                (TaxiPhase::Riding, _) if pos == destination => vec![DROPOFF],
                (TaxiPhase::Waiting, Intent::Helpful) => self.toward(pos, passenger, true),
                (TaxiPhase::Riding, Intent::Helpful) => self.toward(pos, destination, true),
                (TaxiPhase::Waiting, Intent::Misleading) => match self.instance.decoy {
                    Some(decoy) if pos == decoy => {
                        let mut moves = self.toward(pos, passenger, false);
                        moves.push(PICKUP);
                        moves
                    }
                    Some(decoy) => self.toward(pos, decoy, false),
                    None => self.toward(pos, passenger, false),
                },
                (TaxiPhase::Riding, Intent::Misleading) => self.toward(pos, destination, false),
                (TaxiPhase::Delivered, _) => Vec::new(),
            };
            actions.sort_unstable();
            actions.dedup();
            out.insert(s, actions.into_iter().map(ActionId).collect());
        }
        out
    }
}
