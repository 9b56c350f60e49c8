//! The drift-adaptive Q-learning agent and the fixed-schedule baseline.
//!
//! Both agents share one [`Agent`] type; [`AgentKind`] selects the update
//! rule and the end-of-episode response. The adaptive agent scales its
//! learning rate with the TD error and restarts its exploration schedule
//! whenever the Page-Hinkley detector alarms on the episode-reward stream.
//! The baseline uses a constant learning rate and a single decay that never
//! restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::drift::{PageHinkleyConfig, PageHinkleyState};
use crate::error::{Error, Result};
use crate::qcore::{ActionId, QTable, StateId, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Morphin,
    Baseline,
}

impl AgentKind {
    pub const ALL: [AgentKind; 2] = [AgentKind::Morphin, AgentKind::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Morphin => "morphin",
            AgentKind::Baseline => "baseline",
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    /// Base learning rate. The baseline always uses this value.
    pub alpha_base: f64,
    /// Ceiling of the TD-driven learning rate.
    pub alpha_max: f64,
    pub gamma: f64,
    /// TD-error magnitude at which the learning rate sits halfway between
    /// `alpha_base` and `alpha_max`.
    pub k: f64,
    pub epsilon_min: f64,
    pub decay_rate: f64,
    pub ph: PageHinkleyConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            alpha_base: 0.1,
            alpha_max: 0.9,
            gamma: 0.9,
            k: 5.0,
            epsilon_min: 0.05,
            decay_rate: 0.01,
            ph: PageHinkleyConfig::default(),
        }
    }
}

impl AgentConfig {
    /// Checks the parameter ranges. `prefix` names the config section in
    /// error messages.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let field = |name: &str| format!("{prefix}.{name}");
        if !(self.alpha_base > 0.0 && self.alpha_base <= 1.0) {
            return Err(Error::config(field("alpha_base"), "must be in (0, 1]"));
        }
        if !(self.alpha_max > self.alpha_base && self.alpha_max <= 1.0) {
            return Err(Error::config(
                field("alpha_max"),
                format!("must be in (alpha_base = {}, 1]", self.alpha_base),
            ));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config(field("gamma"), "must be in [0, 1)"));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::config(field("k"), "must be finite and > 0"));
        }
        if !(0.0..1.0).contains(&self.epsilon_min) {
            return Err(Error::config(field("epsilon_min"), "must be in [0, 1)"));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate.is_finite()) {
            return Err(Error::config(field("decay_rate"), "must be finite and > 0"));
        }
        self.ph.validate().map_err(|e| match e {
            Error::Config { field: f, message } => Error::Config {
                field: format!("{prefix}.{f}"),
                message,
            },
            other => other,
        })
    }
}

/// Exploration rate for decay counter `e`:
/// `epsilon_min + (1 - epsilon_min) * exp(-decay_rate * e)`.
pub fn current_epsilon(cfg: &AgentConfig, e: u64) -> f64 {
    cfg.epsilon_min + (1.0 - cfg.epsilon_min) * (-cfg.decay_rate * e as f64).exp()
}

/// `r + gamma * max_a Q(s', a) - Q(s, a)`, with no bootstrap on terminal
/// transitions.
pub fn td_error(cfg: &AgentConfig, q: &QTable, t: &Transition) -> Result<f64> {
    let predicted = q.get(t.state, t.action)?;
    let bootstrap = if t.terminal {
        0.0
    } else {
        cfg.gamma * q.max_over_actions(t.next_state)?.0
    };
    Ok(t.reward + bootstrap - predicted)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let ez = z.exp();
        ez / (1.0 + ez)
    }
}

/// `alpha + (alpha_max - alpha) * sigmoid(|td| - k)`.
pub fn dynamic_alpha(cfg: &AgentConfig, td: f64) -> f64 {
    cfg.alpha_base + (cfg.alpha_max - cfg.alpha_base) * sigmoid(td.abs() - cfg.k)
}

/// Per-step record of what the agent did and how it learned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub transition: Transition,
    pub epsilon_used: f64,
    pub alpha_used: f64,
    pub td_error: f64,
    pub explored: bool,
    /// Q(s, a) after the update.
    pub q_value: f64,
}

#[derive(Debug, Clone)]
pub struct Agent {
    kind: AgentKind,
    config: AgentConfig,
    q: QTable,
    decay_counter: u64,
    detector: PageHinkleyState,
    // detector state right after the latest observation, before any reset
    observed: PageHinkleyState,
    rng_seed: u64,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(
        kind: AgentKind,
        config: AgentConfig,
        action_count: usize,
        state_count: usize,
        rng_seed: u64,
    ) -> Self {
        Self {
            kind,
            config,
            q: QTable::zeros(action_count, state_count),
            decay_counter: 0,
            detector: PageHinkleyState::new(),
            observed: PageHinkleyState::new(),
            rng_seed,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        }
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn decay_counter(&self) -> u64 {
        self.decay_counter
    }

    pub fn detector(&self) -> &PageHinkleyState {
        &self.detector
    }

    /// Detector state as of the last episode, including an alarming state
    /// that has since been reset.
    pub fn last_observed_detector(&self) -> &PageHinkleyState {
        &self.observed
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Exploration rate for the current episode. The counter only moves at
    /// episode boundaries, so this is constant within an episode.
    pub fn epsilon(&self) -> f64 {
        current_epsilon(&self.config, self.decay_counter)
    }

    /// Epsilon-greedy choice. Draws one uniform real, and one uniform action
    /// index only when exploring.
    pub fn select_action(&mut self, s: StateId, epsilon: f64) -> Result<(ActionId, bool)> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::contract(format!("epsilon {epsilon} outside [0, 1]")));
        }
        let u: f64 = self.rng.gen();
        if u < epsilon {
            let a = self.rng.gen_range(0..self.q.action_count());
            Ok((ActionId(a), true))
        } else {
            Ok((self.q.max_over_actions(s)?.1, false))
        }
    }

    /// Applies the kind-specific Q update for one transition.
    pub fn learn(&mut self, t: Transition, epsilon: f64, explored: bool) -> Result<StepOutcome> {
        let td = td_error(&self.config, &self.q, &t)?;
        let alpha = match self.kind {
            AgentKind::Morphin => dynamic_alpha(&self.config, td),
            AgentKind::Baseline => self.config.alpha_base,
        };
        let updated = self.q.get(t.state, t.action)? + alpha * td;
        self.q.set(t.state, t.action, updated)?;
        Ok(StepOutcome {
            transition: t,
            epsilon_used: epsilon,
            alpha_used: alpha,
            td_error: td,
            explored,
            q_value: updated,
        })
    }

    /// Closes an episode with its cumulative reward. Returns whether drift
    /// was detected; the baseline never consults its detector.
    pub fn end_episode(&mut self, episode_reward: f64) -> Result<bool> {
        match self.kind {
            AgentKind::Morphin => {
                let alarm = self.detector.update(&self.config.ph, episode_reward)?;
                self.observed = self.detector;
                if alarm {
                    self.decay_counter = 0;
                    self.detector.reset();
                    return Ok(true);
                }
                self.decay_counter += 1;
                Ok(false)
            }
            AgentKind::Baseline => {
                if !episode_reward.is_finite() {
                    return Err(Error::contract("episode reward must be finite"));
                }
                self.decay_counter += 1;
                Ok(false)
            }
        }
    }

    /// Grows the Q-table when the environment offers new actions. The
    /// adaptive agent also restarts exploration and its detector.
    pub fn on_actions_expanded(&mut self, new_action_count: usize) -> Result<()> {
        self.q.expand_actions(new_action_count)?;
        if self.kind == AgentKind::Morphin {
            self.decay_counter = 0;
            self.detector.reset();
        }
        Ok(())
    }
}
