use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Environment;
use crate::error::{Error, Result};
use crate::qcore::{ActionId, StateId, Transition};

/// A signal phase: green for `lane` (0 or 1), discharging up to `capacity`
/// vehicles per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub lane: usize,
    pub capacity: u32,
}

/// Arrival rates taking effect at the start of `episode`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateChange {
    pub episode: usize,
    pub lambda_1: f64,
    pub lambda_2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    /// Initial Poisson arrival means per step.
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub queue_cap: u32,
    pub congestion_threshold: u32,
    pub empty_green_penalty: f64,
    pub base_phases: Vec<Phase>,
    /// Phases appended once, after the agent reports a drift.
    pub aggressive_phases: Vec<Phase>,
    pub drift_schedule: Vec<RateChange>,
    pub steps_per_episode: usize,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            lambda_1: 0.5,
            lambda_2: 0.5,
            queue_cap: 20,
            congestion_threshold: 5,
            empty_green_penalty: 1.0,
            base_phases: vec![Phase { lane: 0, capacity: 2 }, Phase { lane: 1, capacity: 2 }],
            aggressive_phases: vec![Phase { lane: 0, capacity: 4 }, Phase { lane: 1, capacity: 4 }],
            drift_schedule: vec![
                RateChange {
                    episode: 3000,
                    lambda_1: 1.5,
                    lambda_2: 1.5,
                },
                RateChange {
                    episode: 8000,
                    lambda_1: 0.3,
                    lambda_2: 0.3,
                },
            ],
            steps_per_episode: 60,
        }
    }
}

const MAX_LAMBDA: f64 = 100.0;

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |l: f64| l.is_finite() && (0.0..=MAX_LAMBDA).contains(&l);
        if !rate_ok(self.lambda_1) {
            return Err(Error::config("traffic.lambda_1", format!("must be in [0, {MAX_LAMBDA}]")));
        }
        if !rate_ok(self.lambda_2) {
            return Err(Error::config("traffic.lambda_2", format!("must be in [0, {MAX_LAMBDA}]")));
        }
        if self.queue_cap == 0 {
            return Err(Error::config("traffic.queue_cap", "must be > 0"));
        }
        if self.congestion_threshold == 0 {
            return Err(Error::config("traffic.congestion_threshold", "must be > 0"));
        }
        if !(self.empty_green_penalty > 0.0 && self.empty_green_penalty.is_finite()) {
            return Err(Error::config("traffic.empty_green_penalty", "must be finite and > 0"));
        }
        if self.base_phases.is_empty() {
            return Err(Error::config("traffic.base_phases", "need at least one phase"));
        }
        for (name, phases) in [("base_phases", &self.base_phases), ("aggressive_phases", &self.aggressive_phases)] {
            for p in phases {
                if p.lane > 1 {
                    return Err(Error::config(format!("traffic.{name}"), "lane must be 0 or 1"));
                }
                if p.capacity == 0 {
                    return Err(Error::config(format!("traffic.{name}"), "capacity must be > 0"));
                }
            }
        }
        for w in self.drift_schedule.windows(2) {
            if w[1].episode <= w[0].episode {
                return Err(Error::config(
                    "traffic.drift_schedule",
                    "episodes must be strictly increasing",
                ));
            }
        }
        if self
            .drift_schedule
            .iter()
            .any(|c| !rate_ok(c.lambda_1) || !rate_ok(c.lambda_2))
        {
            return Err(Error::config(
                "traffic.drift_schedule",
                format!("rates must be in [0, {MAX_LAMBDA}]"),
            ));
        }
        if self.steps_per_episode == 0 {
            return Err(Error::config("traffic.steps_per_episode", "must be > 0"));
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        let side = self.queue_cap as usize + 1;
        side * side
    }

    pub fn state_of(&self, queues: (u32, u32)) -> StateId {
        StateId(queues.0 as usize * (self.queue_cap as usize + 1) + queues.1 as usize)
    }

    pub fn queues_of(&self, s: StateId) -> (u32, u32) {
        let side = self.queue_cap as usize + 1;
        ((s.0 / side) as u32, (s.0 % side) as u32)
    }

    /// Arrival rates in force during `episode`.
    pub fn rates_for_episode(&self, episode: usize) -> (f64, f64) {
        self.drift_schedule
            .iter()
            .take_while(|c| c.episode <= episode)
            .last()
            .map_or((self.lambda_1, self.lambda_2), |c| (c.lambda_1, c.lambda_2))
    }

    /// Congestion penalty plus the empty-green penalty.
    pub fn reward(&self, after: (u32, u32), served_empty: bool) -> f64 {
        let over = |c: u32| c.saturating_sub(self.congestion_threshold) as f64;
        let empty = if served_empty { self.empty_green_penalty } else { 0.0 };
        -(over(after.0) + over(after.1)) - empty
    }
}

/// Poisson draw by CDF inversion from a single uniform.
pub(crate) fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let u: f64 = rng.gen();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0u32;
    while u > cdf && p > 0.0 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

#[derive(Debug, Clone)]
pub struct Traffic {
    config: TrafficConfig,
    phases: Vec<Phase>,
    expanded: bool,
    rates: (f64, f64),
    queues: (u32, u32),
    steps: usize,
    rng: ChaCha8Rng,
}

impl Traffic {
    pub fn new(config: TrafficConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            phases: config.base_phases.clone(),
            expanded: false,
            rates: config.rates_for_episode(0),
            queues: (0, 0),
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            config,
        })
    }

    pub fn config(&self) -> &TrafficConfig {
        &self.config
    }

    pub fn queues(&self) -> (u32, u32) {
        self.queues
    }

    pub fn set_queues(&mut self, queues: (u32, u32)) {
        let cap = self.config.queue_cap;
        self.queues = (queues.0.min(cap), queues.1.min(cap));
    }

    pub fn rates(&self) -> (f64, f64) {
        self.rates
    }

    pub fn set_rates(&mut self, rates: (f64, f64)) {
        self.rates = rates;
    }

    pub fn is_expanded(&self) -> bool {
        self.expanded
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }
}

impl Environment for Traffic {
    fn state_count(&self) -> usize {
        self.config.state_count()
    }

    fn action_count(&self) -> usize {
        self.phases.len()
    }

    fn on_episode_start(&mut self, episode: usize, drift_detected: bool) -> Result<Option<usize>> {
        self.rates = self.config.rates_for_episode(episode);
        if drift_detected && !self.expanded && !self.config.aggressive_phases.is_empty() {
            self.expanded = true;
            self.phases.extend_from_slice(&self.config.aggressive_phases);
            return Ok(Some(self.phases.len()));
        }
        Ok(None)
    }

    fn reset(&mut self) -> StateId {
        self.queues = (0, 0);
        self.steps = 0;
        self.config.state_of(self.queues)
    }

    fn step(&mut self, action: ActionId) -> Result<Transition> {
        let phase = *self.phases.get(action.0).ok_or_else(|| {
            Error::contract(format!(
                "unknown phase {} ({} phases)",
                action.0,
                self.phases.len()
            ))
        })?;
        let before = self.queues;
        let mut q = [before.0, before.1];
        let served_empty = q[phase.lane] == 0;
        q[phase.lane] -= q[phase.lane].min(phase.capacity);
        let cap = self.config.queue_cap;
        q[0] = (q[0] + poisson(&mut self.rng, self.rates.0)).min(cap);
        q[1] = (q[1] + poisson(&mut self.rng, self.rates.1)).min(cap);
        self.queues = (q[0], q[1]);
        self.steps += 1;
        Ok(Transition {
            state: self.config.state_of(before),
            action,
            reward: self.config.reward(self.queues, served_empty),
            next_state: self.config.state_of(self.queues),
            terminal: self.steps >= self.config.steps_per_episode,
        })
    }
}
