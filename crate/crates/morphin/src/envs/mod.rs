//! Evaluation environments behind a common episodic contract with
//! scheduled reward drift and runtime action-set growth.

mod gridworld;
mod traffic;

pub use gridworld::{Cell, Gridworld, GridworldConfig, BASIC_ACTIONS, JUMP_ACTIONS};
pub use traffic::{Phase, RateChange, Traffic, TrafficConfig};

use crate::error::Result;
use crate::qcore::{ActionId, StateId, Transition};

/// Episodic environment whose reward function and action set may change
/// between episodes.
pub trait Environment: Send {
    fn state_count(&self) -> usize;

    /// Current number of actions. Never shrinks.
    fn action_count(&self) -> usize;

    /// Applies the schedule for `episode` (0-based). `drift_detected` tells
    /// the environment whether the agent's detector fired at the end of the
    /// previous episode. Returns the new action count when the action set
    /// grew.
    fn on_episode_start(&mut self, episode: usize, drift_detected: bool) -> Result<Option<usize>>;

    fn reset(&mut self) -> StateId;

    fn step(&mut self, action: ActionId) -> Result<Transition>;

    /// Fewest steps from the start to the active goal with the current
    /// action set, when the environment has such a notion.
    fn optimal_steps(&self) -> Option<usize> {
        None
    }
}
