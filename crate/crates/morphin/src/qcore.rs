//! Dense action-value tables and the transition record shared by agents and
//! environments.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense index into an environment's enumerated state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub usize);

/// Dense index into the current action set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// One environment step `(s, a, r, s', terminal)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: StateId,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: StateId,
    pub terminal: bool,
}

/// Action-value table stored as an `actions x states` row-major matrix.
///
/// Rows are actions so that adding an action is a row append; existing
/// values never move.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<f64>,
    action_count: usize,
    state_count: usize,
}

impl QTable {
    /// All-zero table. Panics if either dimension is zero.
    pub fn zeros(action_count: usize, state_count: usize) -> Self {
        assert!(action_count > 0 && state_count > 0, "empty Q-table");
        Self {
            values: vec![0.0; action_count * state_count],
            action_count,
            state_count,
        }
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    fn check(&self, s: StateId, a: ActionId) -> Result<usize> {
        if s.0 >= self.state_count {
            return Err(Error::contract(format!(
                "state {} out of bounds ({} states)",
                s.0, self.state_count
            )));
        }
        if a.0 >= self.action_count {
            return Err(Error::contract(format!(
                "action {} out of bounds ({} actions)",
                a.0, self.action_count
            )));
        }
        Ok(a.0 * self.state_count + s.0)
    }

    pub fn get(&self, s: StateId, a: ActionId) -> Result<f64> {
        self.check(s, a).map(|i| self.values[i])
    }

    pub fn set(&mut self, s: StateId, a: ActionId, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::contract(format!("non-finite Q-value {value}")));
        }
        let i = self.check(s, a)?;
        self.values[i] = value;
        Ok(())
    }

    /// Maximum value in state `s` and the lowest action index attaining it.
    pub fn max_over_actions(&self, s: StateId) -> Result<(f64, ActionId)> {
        if s.0 >= self.state_count {
            return Err(Error::contract(format!(
                "state {} out of bounds ({} states)",
                s.0, self.state_count
            )));
        }
        let mut best = (self.values[s.0], ActionId(0));
        for a in 1..self.action_count {
            let v = self.values[a * self.state_count + s.0];
            // strict: earlier action keeps ties
            if v > best.0 {
                best = (v, ActionId(a));
            }
        }
        Ok(best)
    }

    /// Grows the table to `new_action_count` rows. New rows are zero and
    /// existing entries keep their coordinates.
    pub fn expand_actions(&mut self, new_action_count: usize) -> Result<()> {
        if new_action_count <= self.action_count {
            return Err(Error::contract(format!(
                "action expansion must grow the table ({} -> {})",
                self.action_count, new_action_count
            )));
        }
        self.values.resize(new_action_count * self.state_count, 0.0);
        self.action_count = new_action_count;
        Ok(())
    }

    /// The stored values of one action across all states.
    pub fn row(&self, a: ActionId) -> &[f64] {
        let start = a.0 * self.state_count;
        &self.values[start..start + self.state_count]
    }

    /// Writes the table as CSV: a `state_0..state_{N-1}` header, then one
    /// row per action with six decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::Input(e.to_string());
        w.write_record((0..self.state_count).map(|s| format!("state_{s}")))
            .map_err(to_err)?;
        for a in 0..self.action_count {
            w.write_record(self.row(ActionId(a)).iter().map(|v| format!("{v:.6}")))
                .map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::Input(e.to_string()))?;
        Ok(())
    }
}
