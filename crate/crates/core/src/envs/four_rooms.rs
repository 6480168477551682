use std::fmt::Write;

use super::grid::{bfs, descending, offset, MOVES, MOVE_NAMES};
use super::{AgentView, EnvError, Environment, Layout, PreferenceMap, StepOutcome, SymbolicModel};
use crate::action_lang::Value;
use crate::feedback::Intent;
use crate::ids::{ActionId, StateId};

const MAX_SIDE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Free,
    Wall,
    Danger,
}

/// A rectangular grid with one start and one goal cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FourRoomsMap {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Cell>,
    pub start: (usize, usize),
    pub goal: (usize, usize),
}

fn format_err(line: usize, message: impl Into<String>) -> EnvError {
    EnvError::Format {
        what: "map",
        line,
        message: message.into(),
    }
}

impl FourRoomsMap {
    /// One text row per grid row: `#` wall, `.` free, `X` danger, `S` start,
    /// `G` goal. Lines starting with `%` are comments.
    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let mut cells = Vec::new();
        let mut rows = 0;
        let mut cols = None;
        let mut start = None;
        let mut goal = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let width = line.chars().count();
            match cols {
                None => cols = Some(width),
                Some(w) if w != width => {
                    return Err(format_err(
                        line_no,
                        format!("row has {width} cells, expected {w}"),
                    ))
                }
                _ => {}
            }
            if width > MAX_SIDE || rows >= MAX_SIDE {
                return Err(format_err(
                    line_no,
                    format!("grid larger than {MAX_SIDE}x{MAX_SIDE}"),
                ));
            }
            for (c, ch) in line.chars().enumerate() {
                let cell = match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Free,
                    'X' => Cell::Danger,
                    'S' | 'G' => {
                        let slot = if ch == 'S' { &mut start } else { &mut goal };
                        if slot.replace((rows, c)).is_some() {
                            return Err(format_err(line_no, format!("more than one `{ch}`")));
                        }
                        Cell::Free
                    }
                    other => {
                        return Err(format_err(line_no, format!("unknown cell `{other}`")));
                    }
                };
                cells.push(cell);
            }
            rows += 1;
        }
        let last = text.lines().count().max(1);
        let cols = cols.ok_or_else(|| format_err(last, "empty map"))?;
        Ok(FourRoomsMap {
            rows,
            cols,
            cells,
            start: start.ok_or_else(|| format_err(last, "no start cell `S`"))?,
            goal: goal.ok_or_else(|| format_err(last, "no goal cell `G`"))?,
        })
    }

    pub fn cell(&self, (r, c): (usize, usize)) -> Cell {
        self.cells[r * self.cols + c]
    }

    fn index(&self, (r, c): (usize, usize)) -> usize {
        r * self.cols + c
    }

    fn pos(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// Cell reached by `action` from `pos`; walls and edges leave it in place.
    fn target(&self, pos: (usize, usize), action: usize) -> (usize, usize) {
        match offset(self.rows, self.cols, pos, MOVES[action]) {
            Some(next) if self.cell(next) != Cell::Wall => next,
            _ => pos,
        }
    }

    pub fn wall_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == Cell::Wall).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourRoomsRewards {
    pub step: f64,
    pub goal_bonus: f64,
    pub danger_penalty: f64,
    pub danger_terminal: bool,
    pub episode_cap: usize,
}

impl Default for FourRoomsRewards {
    fn default() -> Self {
        FourRoomsRewards {
            step: -1.0,
            goal_bonus: 5.0,
            danger_penalty: -10.0,
            danger_terminal: true,
            episode_cap: 200,
        }
    }
}

/// Grid navigation with the four compass moves. State id `r * cols + c`.
#[derive(Debug, Clone)]
pub struct FourRooms {
    map: FourRoomsMap,
    rewards: FourRoomsRewards,
    symbolic: SymbolicModel,
}

impl FourRooms {
    pub fn new(map: FourRoomsMap, rewards: FourRoomsRewards) -> Result<Self, EnvError> {
        let n = map.rows * map.cols;
        let terminal = |i: usize| {
            map.pos(i) == map.goal || (rewards.danger_terminal && map.cells[i] == Cell::Danger)
        };
        let mut text = String::new();
        let _ = writeln!(text, "% {}x{} grid", map.rows, map.cols);
        let _ = writeln!(text, "fluent Row : 0..{}.", map.rows - 1);
        let _ = writeln!(text, "fluent Col : 0..{}.", map.cols - 1);
        let _ = writeln!(text, "action {}.", MOVE_NAMES.join(", "));
        let mut assignments = Vec::new();
        let mut planning = Vec::new();
        for i in 0..n {
            if map.cells[i] == Cell::Wall {
                continue;
            }
            let (r, c) = map.pos(i);
            assignments.push((
                StateId(i),
                vec![("Row", Value::Int(r as i64)), ("Col", Value::Int(c as i64))],
            ));
            if terminal(i) {
                continue;
            }
            planning.push(StateId(i));
            for (a, name) in MOVE_NAMES.iter().enumerate() {
                let (nr, nc) = map.target((r, c), a);
                if nr != r {
                    let _ = writeln!(text, "{name} causes Row={nr} if Row={r}, Col={c}.");
                }
                if nc != c {
                    let _ = writeln!(text, "{name} causes Col={nc} if Row={r}, Col={c}.");
                }
            }
        }
        let (sr, sc) = map.start;
        let (gr, gc) = map.goal;
        let symbolic = SymbolicModel::build(
            text,
            n,
            &assignments,
            &[
                ("Row", Value::Int(sr as i64)),
                ("Col", Value::Int(sc as i64)),
            ],
            &[
                ("Row", Value::Int(gr as i64)),
                ("Col", Value::Int(gc as i64)),
            ],
            &planning,
        )?;
        Ok(FourRooms {
            map,
            rewards,
            symbolic,
        })
    }

    pub fn map(&self) -> &FourRoomsMap {
        &self.map
    }

    pub fn rewards(&self) -> &FourRoomsRewards {
        &self.rewards
    }

    pub fn state_of(&self, pos: (usize, usize)) -> StateId {
        StateId(self.map.index(pos))
    }

    /// Length of a shortest path from start to goal that never enters a
    /// danger cell.
    pub fn shortest_safe_path(&self) -> Option<u32> {
        self.safe_distances()[self.map.index(self.map.start)]
    }

    fn distances(&self, allow_danger: bool) -> Vec<Option<u32>> {
        let map = &self.map;
        let open = |i: usize| match map.cells[i] {
            Cell::Free => true,
            Cell::Danger => allow_danger,
            Cell::Wall => false,
        };
        bfs(map.cells.len(), &[map.index(map.goal)], |u| {
            if !open(u) {
                return Vec::new();
            }
            (0..4)
                .map(|a| map.index(map.target(map.pos(u), a)))
                .filter(|&v| v != u && open(v))
                .collect()
        })
    }

    fn safe_distances(&self) -> Vec<Option<u32>> {
        self.distances(false)
    }

    fn check(&self, state: StateId) -> Result<(usize, usize), EnvError> {
        if state.0 >= self.map.cells.len() || self.map.cells[state.0] == Cell::Wall {
            return Err(EnvError::InvalidState(state));
        }
        Ok(self.map.pos(state.0))
    }
}

impl Environment for FourRooms {
    fn name(&self) -> &str {
        "four_rooms"
    }

    fn n_states(&self) -> usize {
        self.map.cells.len()
    }

    fn action_names(&self) -> &[&'static str] {
        &MOVE_NAMES
    }

    fn reset(&self) -> StateId {
        self.state_of(self.map.start)
    }

    fn step(&self, state: StateId, action: ActionId) -> Result<StepOutcome, EnvError> {
        let pos = self.check(state)?;
        if self.is_terminal(state) {
            return Err(EnvError::Terminal(state));
        }
        if action.0 >= MOVE_NAMES.len() {
            return Err(EnvError::InvalidAction(action));
        }
        let next = self.map.target(pos, action.0);
        let mut reward = self.rewards.step;
        let mut terminal = false;
        if next == self.map.goal {
            reward += self.rewards.goal_bonus;
            terminal = true;
        } else if self.map.cell(next) == Cell::Danger {
            reward += self.rewards.danger_penalty;
            terminal = self.rewards.danger_terminal;
        }
        Ok(StepOutcome {
            next: self.state_of(next),
            reward,
            terminal,
        })
    }

    fn is_terminal(&self, state: StateId) -> bool {
        match self.map.cells.get(state.0) {
            Some(Cell::Danger) => self.rewards.danger_terminal,
            Some(_) => self.map.pos(state.0) == self.map.goal,
            None => false,
        }
    }

    fn states(&self) -> Vec<StateId> {
        let map = &self.map;
        let reach = bfs(map.cells.len(), &[map.index(map.start)], |u| {
            if self.is_terminal(StateId(u)) {
                return Vec::new();
            }
            (0..4)
                .map(|a| map.index(map.target(map.pos(u), a)))
                .collect()
        });
        (0..map.cells.len())
            .filter(|&i| reach[i].is_some() && !self.is_terminal(StateId(i)))
            .map(StateId)
            .collect()
    }

    fn episode_cap(&self) -> usize {
        self.rewards.episode_cap
    }

    fn symbolic(&self) -> &SymbolicModel {
        &self.symbolic
    }

    fn layout(&self) -> Layout {
        let cells = (0..self.map.rows)
            .map(|r| {
                (0..self.map.cols)
                    .map(|c| match self.map.cell((r, c)) {
                        _ if (r, c) == self.map.goal => 'G',
                        Cell::Wall => '#',
                        Cell::Danger => 'X',
                        Cell::Free => '.',
                    })
                    .collect()
            })
            .collect();
        Layout {
            rows: self.map.rows,
            cols: self.map.cols,
            cells,
            blocked_edges: Vec::new(),
            landmarks: Vec::new(),
            actions: MOVE_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn view(&self, state: StateId) -> Result<AgentView, EnvError> {
        let (row, col) = self.check(state)?;
        Ok(AgentView {
            row,
            col,
            passenger: None,
        })
    }

    /// Helpful: moves along a shortest path to the goal that avoids danger.
    /// Misleading: moves along a shortest path that ignores danger, plus
    /// every move into an adjacent danger cell.
    fn preferences(&self, intent: Intent) -> PreferenceMap {
        let safe = self.distances(false);
        let plain = self.distances(true);
        let mut out = PreferenceMap::new();
        for s in self.states() {
            let pos = self.map.pos(s.0);
            let next: Vec<Option<usize>> = (0..4)
                .map(|a| {
                    let n = self.map.target(pos, a);
                    (n != pos).then(|| self.map.index(n))
                })
                .collect();
            let mut actions = match intent {
                Intent::Helpful => {
                    let safe_next: Vec<Option<usize>> = next
                        .iter()
                        .map(|n| n.filter(|&n| self.map.cells[n] != Cell::Danger))
                        .collect();
                    let moves = descending(&safe, s.0, &safe_next);
                    if moves.is_empty() {
                        descending(&plain, s.0, &next)
                    } else {
                        moves
                    }
                }
                Intent::Misleading => {
                    let mut moves = descending(&plain, s.0, &next);
                    moves.extend((0..4).filter(
                        |&a| matches!(next[a], Some(n) if self.map.cells[n] == Cell::Danger),
                    ));
                    moves
                }
            };
            actions.sort_unstable();
            actions.dedup();
            out.insert(s, actions.into_iter().map(ActionId).collect());
        }
        out
    }
}
