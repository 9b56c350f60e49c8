use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Environment;
use crate::error::{Error, Result};
use crate::qcore::{ActionId, StateId, Transition};

/// Up, down, left, right.
pub const BASIC_ACTIONS: usize = 4;
/// Basic moves plus two-cell jumps in the same four directions.
pub const JUMP_ACTIONS: usize = 8;

const DIRECTIONS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Grid cell as `[row, col]`, row 0 at the top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell(pub usize, pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridworldConfig {
    pub width: usize,
    pub height: usize,
    pub start: Cell,
    pub goal_a: Cell,
    pub goal_b: Cell,
    pub goal_reward: f64,
    pub step_reward: f64,
    /// Episodes between goal swaps; `None` keeps `goal_a` forever.
    #[serde(default)]
    pub goal_swap_period: Option<usize>,
    pub max_steps_per_episode: usize,
    /// Episode at which the four jump actions become available.
    #[serde(default)]
    pub jump_introduction_episode: Option<usize>,
    /// Impassable cells. Jumps may pass over them but not land on them.
    pub obstacles: Vec<Cell>,
}

impl Default for GridworldConfig {
    fn default() -> Self {
        Self {
            width: 9,
            height: 9,
            start: Cell(4, 4),
            goal_a: Cell(0, 0),
            goal_b: Cell(8, 8),
            goal_reward: 100.0,
            step_reward: -1.0,
            goal_swap_period: Some(300),
            max_steps_per_episode: 500,
            jump_introduction_episode: None,
            obstacles: Vec::new(),
        }
    }
}

impl GridworldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("gridworld.width", "grid must be non-empty"));
        }
        let inside = |c: &Cell| c.0 < self.height && c.1 < self.width;
        for (name, cell) in [("start", self.start), ("goal_a", self.goal_a), ("goal_b", self.goal_b)] {
            if !inside(&cell) {
                return Err(Error::config(format!("gridworld.{name}"), "cell outside the grid"));
            }
            if self.obstacles.contains(&cell) {
                return Err(Error::config(format!("gridworld.{name}"), "cell is an obstacle"));
            }
        }
        if self.start == self.goal_a || self.start == self.goal_b {
            return Err(Error::config("gridworld.start", "start must differ from both goals"));
        }
        if let Some(bad) = self.obstacles.iter().find(|c| !inside(c)) {
            return Err(Error::config(
                "gridworld.obstacles",
                format!("cell {bad:?} outside the grid"),
            ));
        }
        if self.goal_swap_period == Some(0) {
            return Err(Error::config("gridworld.goal_swap_period", "must be > 0"));
        }
        if self.max_steps_per_episode == 0 {
            return Err(Error::config("gridworld.max_steps_per_episode", "must be > 0"));
        }
        if !(self.goal_reward.is_finite() && self.step_reward.is_finite()) {
            return Err(Error::config("gridworld.goal_reward", "rewards must be finite"));
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        self.width * self.height
    }

    /// Row-major cell enumeration.
    pub fn state_of(&self, cell: Cell) -> StateId {
        StateId(cell.0 * self.width + cell.1)
    }

    pub fn cell_of(&self, s: StateId) -> Cell {
        Cell(s.0 / self.width, s.0 % self.width)
    }

    /// Goal for a 0-based episode: `goal_a` in even swap intervals, `goal_b`
    /// in odd ones.
    pub fn goal_for_episode(&self, episode: usize) -> Cell {
        match self.goal_swap_period {
            Some(p) if (episode / p) % 2 == 1 => self.goal_b,
            _ => self.goal_a,
        }
    }

    /// Episodes at which the goal moves, within `episodes`.
    pub fn swap_episodes(&self, episodes: usize) -> Vec<usize> {
        match self.goal_swap_period {
            Some(p) => (1..).map(|i| i * p).take_while(|&e| e < episodes).collect(),
            None => Vec::new(),
        }
    }

    pub fn action_count_for_episode(&self, episode: usize) -> usize {
        match self.jump_introduction_episode {
            Some(j) if episode >= j => JUMP_ACTIONS,
            _ => BASIC_ACTIONS,
        }
    }

    /// Cell reached by `action`. Moves are clamped to the grid; a move that
    /// would land on an obstacle leaves the cell unchanged.
    pub fn move_cell(&self, from: Cell, action: ActionId) -> Cell {
        let (dr, dc) = DIRECTIONS[action.0 % 4];
        let reach = if action.0 >= BASIC_ACTIONS { 2 } else { 1 };
        let clamp = |v: usize, d: isize, hi: usize| {
            (v as isize + d * reach).clamp(0, hi as isize - 1) as usize
        };
        let to = Cell(clamp(from.0, dr, self.height), clamp(from.1, dc, self.width));
        if self.obstacles.contains(&to) {
            from
        } else {
            to
        }
    }

    /// Breadth-first shortest path length over the first `action_count`
    /// actions, or `None` if `to` is unreachable.
    pub fn shortest_path(&self, from: Cell, to: Cell, action_count: usize) -> Option<usize> {
        let mut dist = vec![usize::MAX; self.state_count()];
        let mut queue = VecDeque::from([from]);
        dist[self.state_of(from).0] = 0;
        while let Some(c) = queue.pop_front() {
            let d = dist[self.state_of(c).0];
            if c == to {
                return Some(d);
            }
            for a in 0..action_count {
                let n = self.move_cell(c, ActionId(a));
                let slot = &mut dist[self.state_of(n).0];
                if *slot == usize::MAX {
                    *slot = d + 1;
                    queue.push_back(n);
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone)]
pub struct Gridworld {
    config: GridworldConfig,
    goal: Cell,
    action_count: usize,
    position: Cell,
    steps: usize,
    optimal: Option<usize>,
}

impl Gridworld {
    pub fn new(config: GridworldConfig) -> Result<Self> {
        config.validate()?;
        let goal = config.goal_for_episode(0);
        let optimal = config.shortest_path(config.start, goal, BASIC_ACTIONS);
        Ok(Self {
            position: config.start,
            goal,
            action_count: BASIC_ACTIONS,
            steps: 0,
            optimal,
            config,
        })
    }

    pub fn config(&self) -> &GridworldConfig {
        &self.config
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn position(&self) -> Cell {
        self.position
    }

    /// Places the agent at `cell` mid-episode.
    pub fn set_position(&mut self, cell: Cell) {
        self.position = cell;
    }
}

impl Environment for Gridworld {
    fn state_count(&self) -> usize {
        self.config.state_count()
    }

    fn action_count(&self) -> usize {
        self.action_count
    }

    fn on_episode_start(&mut self, episode: usize, _drift_detected: bool) -> Result<Option<usize>> {
        let goal = self.config.goal_for_episode(episode);
        let actions = self.config.action_count_for_episode(episode);
        let grew = (actions > self.action_count).then_some(actions);
        if goal != self.goal || grew.is_some() {
            self.goal = goal;
            self.action_count = actions;
            self.optimal = self.config.shortest_path(self.config.start, goal, actions);
        }
        Ok(grew)
    }

    fn reset(&mut self) -> StateId {
        self.position = self.config.start;
        self.steps = 0;
        self.config.state_of(self.position)
    }

    fn step(&mut self, action: ActionId) -> Result<Transition> {
        if action.0 >= self.action_count {
            return Err(Error::contract(format!(
                "action {} not available ({} actions)",
                action.0, self.action_count
            )));
        }
        let from = self.position;
        let to = self.config.move_cell(from, action);
        self.position = to;
        self.steps += 1;
        let at_goal = to == self.goal;
        Ok(Transition {
            state: self.config.state_of(from),
            action,
            reward: if at_goal {
                self.config.goal_reward
            } else {
                self.config.step_reward
            },
            next_state: self.config.state_of(to),
            terminal: at_goal || self.steps >= self.config.max_steps_per_episode,
        })
    }

    fn optimal_steps(&self) -> Option<usize> {
        self.optimal
    }
}
