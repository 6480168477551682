//! Plain-text checkpoints of tabular parameters.
//!
//! ```text
//! # pacman-lab tables v1
//! table policy 3 2
//! 0 0 0.5
//! 0 1 -0.5
//! table value 3 -
//! 0 - 1.25
//! ```
//!
//! A `table` header names the table and gives its shape; `-` in the action
//! column marks a state-indexed table. Entries not listed are zero.

use std::fmt::Write;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("snapshot line {line}: {message}")]
pub struct SnapshotError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TableSnapshot {
    pub name: String,
    pub n_states: usize,
    /// `None` for tables indexed by state only.
    pub n_actions: Option<usize>,
    /// Row-major values, `n_states * n_actions.unwrap_or(1)` entries.
    pub values: Vec<f64>,
}

impl TableSnapshot {
    pub fn state_action(name: &str, n_states: usize, n_actions: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), n_states * n_actions);
        TableSnapshot {
            name: name.to_string(),
            n_states,
            n_actions: Some(n_actions),
            values: values.to_vec(),
        }
    }

    pub fn state(name: &str, values: &[f64]) -> Self {
        TableSnapshot {
            name: name.to_string(),
            n_states: values.len(),
            n_actions: None,
            values: values.to_vec(),
        }
    }

    fn width(&self) -> usize {
        self.n_actions.unwrap_or(1)
    }
}

const HEADER: &str = "# pacman-lab tables v1";
const MAX_ENTRIES: usize = 1 << 24;

pub fn write_snapshots(tables: &[TableSnapshot]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    for table in tables {
        match table.n_actions {
            Some(n) => {
                let _ = writeln!(out, "table {} {} {}", table.name, table.n_states, n);
            }
            None => {
                let _ = writeln!(out, "table {} {} -", table.name, table.n_states);
            }
        }
        let width = table.width();
        for (i, v) in table.values.iter().enumerate() {
            let (s, a) = (i / width, i % width);
            match table.n_actions {
                // `{:?}` prints the shortest representation that parses back
                // to the same f64.
                Some(_) => {
                    let _ = writeln!(out, "{s} {a} {v:?}");
                }
                None => {
                    let _ = writeln!(out, "{s} - {v:?}");
                }
            }
        }
    }
    out
}

fn err(line: usize, message: impl Into<String>) -> SnapshotError {
    SnapshotError {
        line,
        message: message.into(),
    }
}

pub fn parse_snapshots(text: &str) -> Result<Vec<TableSnapshot>, SnapshotError> {
    let mut tables: Vec<TableSnapshot> = Vec::new();
    let mut seen: Vec<bool> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "table" {
            let [_, name, states, actions] = fields[..] else {
                return Err(err(line_no, "expected `table <name> <states> <actions|->`"));
            };
            if tables.iter().any(|t| t.name == name) {
                return Err(err(line_no, format!("duplicate table `{name}`")));
            }
            let n_states: usize = states
                .parse()
                .map_err(|_| err(line_no, format!("bad state count `{states}`")))?;
            let n_actions = match actions {
                "-" => None,
                n => Some(
                    n.parse::<usize>()
                        .ok()
                        .filter(|n| *n > 0)
                        .ok_or_else(|| err(line_no, format!("bad action count `{n}`")))?,
                ),
            };
            let size = n_states
                .checked_mul(n_actions.unwrap_or(1))
                .filter(|s| *s <= MAX_ENTRIES)
                .ok_or_else(|| err(line_no, "table too large"))?;
            tables.push(TableSnapshot {
                name: name.to_string(),
                n_states,
                n_actions,
                values: vec![0.0; size],
            });
            seen = vec![false; size];
            continue;
        }
        let table = tables
            .last_mut()
            .ok_or_else(|| err(line_no, "entry before any table header"))?;
        let [s, a, v] = fields[..] else {
            return Err(err(line_no, "expected `<state> <action|-> <value>`"));
        };
        let s: usize = s
            .parse()
            .ok()
            .filter(|s| *s < table.n_states)
            .ok_or_else(|| err(line_no, format!("state `{s}` out of range")))?;
        let a: usize = match (table.n_actions, a) {
            (None, "-") => 0,
            (Some(n), a) => a
                .parse()
                .ok()
                .filter(|a| *a < n)
                .ok_or_else(|| err(line_no, format!("action `{a}` out of range")))?,
            (None, other) => {
                return Err(err(
                    line_no,
                    format!("expected `-` for action, got `{other}`"),
                ))
            }
        };
        let v: f64 = v
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(line_no, format!("bad value `{v}`")))?;
        let index = s * table.width() + a;
        if std::mem::replace(&mut seen[index], true) {
            return Err(err(line_no, format!("duplicate entry ({s}, {a})")));
        }
        table.values[index] = v;
    }
    Ok(tables)
}
