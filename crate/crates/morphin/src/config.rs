//! Experiment files.
//!
//! An experiment is a TOML document. Every key is optional except
//! `scenario`; missing keys take the scenario's preset value, so a file can
//! be as small as `scenario = "traffic"`. Unknown keys are errors.
//!
//! ```toml
//! scenario = "gridworld_goals"   # gridworld_goals | gridworld_actions | traffic
//! episodes = 1500
//! trials = 50
//! base_seed = 7
//!
//! [convergence]
//! window = 30
//! tolerance = 0.25
//!
//! [morphin]          # same keys for [baseline]
//! alpha_base = 0.1
//! decay_rate = 0.05
//! [morphin.ph]
//! threshold_h = 300.0
//! direction = "decrease_only"
//!
//! [gridworld]        # or [traffic]
//! goal_swap_period = 300
//!
//! [output]
//! step_trace_trials = [0]
//! ```

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, AgentKind};
use crate::drift::Direction;
use crate::envs::{GridworldConfig, RateChange, TrafficConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    GridworldGoals,
    GridworldActions,
    Traffic,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::GridworldGoals => "gridworld_goals",
            Scenario::GridworldActions => "gridworld_actions",
            Scenario::Traffic => "traffic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    /// Episodes the performance band must hold.
    pub window: usize,
    /// Relative slack of the band.
    pub tolerance: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            window: 30,
            tolerance: 0.25,
        }
    }
}

/// Optional per-trial artifacts written next to the summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputOptions {
    /// `series/<agent>_<trial>.csv` for every trial.
    pub series: bool,
    /// Final Q-table of every trial under `qtables/`.
    pub q_tables: bool,
    /// Per-episode detector state of every adaptive-agent trial.
    pub detector_traces: bool,
    /// Trials whose every step is written under `steps/`.
    pub step_trace_trials: Vec<usize>,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            series: true,
            q_tables: false,
            detector_traces: false,
            step_trace_trials: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub episodes: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub convergence: ConvergenceConfig,
    pub morphin: AgentConfig,
    pub baseline: AgentConfig,
    pub gridworld: GridworldConfig,
    pub traffic: TrafficConfig,
    pub output: OutputOptions,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::preset(Scenario::GridworldGoals)
    }
}

fn gridworld_agent() -> AgentConfig {
    let mut cfg = AgentConfig {
        decay_rate: 0.05,
        ..AgentConfig::default()
    };
    cfg.ph.direction = Direction::DecreaseOnly;
    cfg
}

impl ExperimentSpec {
    /// Full-scale defaults for a scenario.
    pub fn preset(scenario: Scenario) -> Self {
        let agent = gridworld_agent();
        let base = Self {
            scenario,
            episodes: 1500,
            trials: 1000,
            base_seed: 0,
            convergence: ConvergenceConfig::default(),
            morphin: agent,
            baseline: agent,
            gridworld: GridworldConfig::default(),
            traffic: TrafficConfig::default(),
            output: OutputOptions::default(),
        };
        match scenario {
            Scenario::GridworldGoals => base,
            Scenario::GridworldActions => Self {
                episodes: 400,
                gridworld: GridworldConfig {
                    goal_swap_period: None,
                    jump_introduction_episode: Some(300),
                    ..GridworldConfig::default()
                },
                ..base
            },
            Scenario::Traffic => Self {
                episodes: 10_000,
                trials: 100,
                ..base
            },
        }
    }

    /// The smaller variants used by the acceptance suite.
    pub fn desk(scenario: Scenario) -> Self {
        let mut spec = Self::preset(scenario);
        match scenario {
            Scenario::GridworldGoals | Scenario::GridworldActions => spec.trials = 50,
            Scenario::Traffic => {
                spec.trials = 20;
                spec.episodes = 1000;
                spec.traffic.drift_schedule = vec![
                    RateChange {
                        episode: 300,
                        lambda_1: 1.5,
                        lambda_2: 1.5,
                    },
                    RateChange {
                        episode: 800,
                        lambda_1: 0.3,
                        lambda_2: 0.3,
                    },
                ];
            }
        }
        spec
    }

    pub fn agent_config(&self, kind: AgentKind) -> &AgentConfig {
        match kind {
            AgentKind::Morphin => &self.morphin,
            AgentKind::Baseline => &self.baseline,
        }
    }

    /// Episodes at which the environment changes, in order.
    pub fn drift_episodes(&self) -> Vec<usize> {
        match self.scenario {
            Scenario::GridworldGoals => self.gridworld.swap_episodes(self.episodes),
            Scenario::GridworldActions => self
                .gridworld
                .jump_introduction_episode
                .filter(|&j| j < self.episodes)
                .into_iter()
                .collect(),
            Scenario::Traffic => self
                .traffic
                .drift_schedule
                .iter()
                .map(|c| c.episode)
                .filter(|&e| e < self.episodes)
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be >= 1"));
        }
        if self.convergence.window == 0 {
            return Err(Error::config("convergence.window", "must be >= 1"));
        }
        if !(self.convergence.tolerance > 0.0 && self.convergence.tolerance.is_finite()) {
            return Err(Error::config("convergence.tolerance", "must be finite and > 0"));
        }
        self.morphin.validate("morphin")?;
        self.baseline.validate("baseline")?;
        if let Some(&t) = self.output.step_trace_trials.iter().find(|&&t| t >= self.trials) {
            return Err(Error::config(
                "output.step_trace_trials",
                format!("trial {t} out of range ({} trials)", self.trials),
            ));
        }
        match self.scenario {
            Scenario::GridworldGoals => {
                self.gridworld.validate()?;
                match self.gridworld.goal_swap_period {
                    Some(p) if p < self.episodes => {}
                    _ => {
                        return Err(Error::config(
                            "gridworld.goal_swap_period",
                            "gridworld_goals needs a swap period shorter than the run",
                        ))
                    }
                }
            }
            Scenario::GridworldActions => {
                self.gridworld.validate()?;
                match self.gridworld.jump_introduction_episode {
                    Some(j) if j < self.episodes => {}
                    _ => {
                        return Err(Error::config(
                            "gridworld.jump_introduction_episode",
                            "gridworld_actions needs a jump episode inside the run",
                        ))
                    }
                }
            }
            Scenario::Traffic => {
                self.traffic.validate()?;
                if let Some(c) = self.traffic.drift_schedule.iter().find(|c| c.episode >= self.episodes) {
                    return Err(Error::config(
                        "traffic.drift_schedule",
                        format!("drift at episode {} is past the run ({} episodes)", c.episode, self.episodes),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Parses an experiment document, applies `key=value` overrides on top
    /// and validates the result.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        // Schema pass against the raw text so errors carry line numbers.
        toml::from_str::<ExperimentSpec>(text).map_err(|e| Error::config(error_field(&e), e.to_string()))?;
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        for (key, value) in overrides {
            set_path(&mut table, key, value)?;
        }
        let scenario = match table.get("scenario") {
            Some(v) => Scenario::deserialize(v.clone()).map_err(|e| Error::config("scenario", e.to_string()))?,
            None => return Err(Error::config("scenario", "missing; pick gridworld_goals, gridworld_actions or traffic")),
        };
        let toml::Value::Table(mut merged) = toml::Value::try_from(Self::preset(scenario))
            .map_err(|e| Error::config("<preset>", e.to_string()))?
        else {
            unreachable!("spec serializes to a table");
        };
        merge(&mut merged, table);
        let spec = ExperimentSpec::deserialize(toml::Value::Table(merged))
            .map_err(|e| Error::config(error_field(&e), e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

fn error_field(e: &toml::de::Error) -> String {
    let msg = e.message();
    msg.split('`').nth(1).map(str::to_owned).unwrap_or_else(|| "<document>".into())
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses an override value as a TOML literal, falling back to a bare
/// string so `direction=two_sided` works without quoting.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

fn set_path(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "malformed override key"));
    }
    let mut cur = &mut *table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{part}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw));
    // Re-check the schema so unknown keys name the override that added them.
    ExperimentSpec::deserialize(toml::Value::Table(table.clone()))
        .map(|_| ())
        .map_err(|e| Error::config(key, e.to_string()))
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::config(s, "override must look like key=value"))?;
    Ok((k.trim().to_owned(), v.trim().to_owned()))
}

/// Canned experiment files shipped with the crate.
pub const BUILTIN_CONFIGS: &[(&str, &str)] = &[
    ("gridworld_goals", include_str!("../configs/gridworld_goals.toml")),
    ("gridworld_goals_desk", include_str!("../configs/gridworld_goals_desk.toml")),
    ("gridworld_actions", include_str!("../configs/gridworld_actions.toml")),
    ("gridworld_actions_desk", include_str!("../configs/gridworld_actions_desk.toml")),
    ("traffic", include_str!("../configs/traffic.toml")),
    ("traffic_desk", include_str!("../configs/traffic_desk.toml")),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTIN_CONFIGS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
