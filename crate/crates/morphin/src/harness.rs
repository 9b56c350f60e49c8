//! Seeded multi-trial experiment runner.
//!
//! A trial is one agent living through one full scenario run. Every trial
//! draws its randomness from a seed derived from
//! `(base_seed, trial_index, agent_kind)`, so trials are independent and a
//! run gives the same records whether trials execute sequentially or on a
//! rayon pool.

use serde::Serialize;

use crate::agents::{Agent, AgentKind};
use crate::config::{ExperimentSpec, Scenario};
use crate::drift::TraceRow;
use crate::envs::{Environment, Gridworld, Traffic};
use crate::error::{Error, Result};
use crate::qcore::QTable;
use crate::stats::{self, Estimate, WelchTest};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of one trial's random stream.
pub fn trial_seed(base_seed: u64, trial: usize, kind: AgentKind) -> u64 {
    let tag = match kind {
        AgentKind::Morphin => 0x6d6f_7270,
        AgentKind::Baseline => 0x6261_7365,
    };
    splitmix64(splitmix64(splitmix64(base_seed) ^ trial as u64) ^ tag)
}

fn stream_seeds(seed: u64) -> (u64, u64) {
    (splitmix64(seed ^ 1), splitmix64(seed ^ 2))
}

/// One row of a per-step trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepTraceRow {
    pub step: usize,
    pub episode: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub q_value: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub td_error: f64,
    pub explored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub agent: AgentKind,
    pub seed: u64,
    pub episode_reward: Vec<f64>,
    pub steps_taken: Vec<usize>,
    pub epsilon_at_start: Vec<f64>,
    /// Whether the agent's detector fired at the end of each episode.
    pub drift_flags: Vec<bool>,
    /// Episodes at whose start the action set grew.
    pub expansions: Vec<usize>,
    pub total_steps: usize,
    /// Episodes after each scheduled drift until convergence.
    pub convergence: Vec<Option<usize>>,
    pub final_q: QTable,
    pub detector_trace: Option<Vec<TraceRow>>,
    pub step_trace: Option<Vec<StepTraceRow>>,
}

impl TrialRecord {
    pub fn detections(&self) -> impl Iterator<Item = usize> + '_ {
        self.drift_flags.iter().enumerate().filter(|(_, f)| **f).map(|(e, _)| e)
    }
}

fn build_env(spec: &ExperimentSpec, seed: u64) -> Result<Box<dyn Environment>> {
    Ok(match spec.scenario {
        Scenario::GridworldGoals | Scenario::GridworldActions => Box::new(Gridworld::new(spec.gridworld.clone())?),
        Scenario::Traffic => Box::new(Traffic::new(spec.traffic.clone(), seed)?),
    })
}

/// Shortest path to the goal in force from `episode` on, for Gridworld
/// scenarios.
fn optimal_steps_at(spec: &ExperimentSpec, episode: usize) -> Option<usize> {
    let g = &spec.gridworld;
    g.shortest_path(g.start, g.goal_for_episode(episode), g.action_count_for_episode(episode))
}

/// Runs one trial to completion.
pub fn run_trial(spec: &ExperimentSpec, kind: AgentKind, trial: usize) -> Result<TrialRecord> {
    let seed = trial_seed(spec.base_seed, trial, kind);
    let (agent_seed, env_seed) = stream_seeds(seed);
    let mut env = build_env(spec, env_seed)?;
    let mut agent = Agent::new(
        kind,
        *spec.agent_config(kind),
        env.action_count(),
        env.state_count(),
        agent_seed,
    );
    let abort = |message: String| Error::Trial {
        trial,
        agent: kind.to_string(),
        message,
    };

    let n = spec.episodes;
    let mut rec = TrialRecord {
        trial,
        agent: kind,
        seed,
        episode_reward: Vec::with_capacity(n),
        steps_taken: Vec::with_capacity(n),
        epsilon_at_start: Vec::with_capacity(n),
        drift_flags: Vec::with_capacity(n),
        expansions: Vec::new(),
        total_steps: 0,
        convergence: Vec::new(),
        final_q: QTable::zeros(1, 1),
        detector_trace: (spec.output.detector_traces && kind == AgentKind::Morphin).then(Vec::new),
        step_trace: spec.output.step_trace_trials.contains(&trial).then(Vec::new),
    };

    let mut drift_detected = false;
    for episode in 0..n {
        if let Some(count) = env.on_episode_start(episode, drift_detected)? {
            agent
                .on_actions_expanded(count)
                .map_err(|e| abort(format!("expansion at episode {episode}: {e}")))?;
            rec.expansions.push(episode);
        }
        if agent.q().action_count() != env.action_count() {
            return Err(abort(format!(
                "episode {episode}: agent has {} actions, environment {}",
                agent.q().action_count(),
                env.action_count()
            )));
        }

        let epsilon = agent.epsilon();
        let mut s = env.reset();
        let mut episode_reward = 0.0;
        let mut steps = 0;
        loop {
            let (a, explored) = agent.select_action(s, epsilon)?;
            let t = env.step(a)?;
            episode_reward += t.reward;
            steps += 1;
            let out = agent.learn(t, epsilon, explored)?;
            if let Some(trace) = rec.step_trace.as_mut() {
                trace.push(StepTraceRow {
                    step: rec.total_steps + steps - 1,
                    episode,
                    state: t.state.0,
                    action: t.action.0,
                    reward: t.reward,
                    q_value: out.q_value,
                    epsilon,
                    alpha: out.alpha_used,
                    td_error: out.td_error,
                    explored,
                });
            }
            s = t.next_state;
            if t.terminal {
                break;
            }
        }

        drift_detected = agent.end_episode(episode_reward)?;
        if let Some(trace) = rec.detector_trace.as_mut() {
            let d = agent.last_observed_detector();
            trace.push(TraceRow {
                episode,
                x: episode_reward,
                running_mean: d.running_mean,
                cum_dec: d.cum_dec,
                cum_inc: d.cum_inc,
                drift_flag: drift_detected,
            });
        }
        rec.episode_reward.push(episode_reward);
        rec.steps_taken.push(steps);
        rec.epsilon_at_start.push(epsilon);
        rec.drift_flags.push(drift_detected);
        rec.total_steps += steps;
    }

    rec.convergence = convergence_for(spec, &rec);
    rec.final_q = agent.q().clone();
    Ok(rec)
}

fn convergence_for(spec: &ExperimentSpec, rec: &TrialRecord) -> Vec<Option<usize>> {
    let drifts = spec.drift_episodes();
    let w = spec.convergence.window;
    let tol = spec.convergence.tolerance;
    drifts
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let end = drifts.get(i + 1).copied().unwrap_or(spec.episodes);
            match spec.scenario {
                Scenario::Traffic => converged_reward(&rec.episode_reward[d..end], w, tol),
                _ => optimal_steps_at(spec, d).and_then(|opt| converged_steps(&rec.steps_taken[d..end], opt, w, tol)),
            }
        })
        .collect()
}

/// Smallest `n` such that every episode in `steps[n..n + window]` takes at
/// most `(1 + tolerance) * optimal` steps. `steps` starts at the drift and
/// ends before the next one.
pub fn converged_steps(steps: &[usize], optimal: usize, window: usize, tolerance: f64) -> Option<usize> {
    let bound = (1.0 + tolerance) * optimal as f64;
    first_run(steps.iter().map(|&s| s as f64 <= bound), window)
}

/// Reward analogue of [`converged_steps`]: the band is anchored at the best
/// `window`-episode mean reward inside the slice, and every episode of the
/// window must score at least `best - tolerance * |best|`.
pub fn converged_reward(rewards: &[f64], window: usize, tolerance: f64) -> Option<usize> {
    if rewards.len() < window {
        return None;
    }
    let best = rewards
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = best - tolerance * best.abs();
    first_run(rewards.iter().map(|&r| r >= floor), window)
}

fn first_run(ok: impl Iterator<Item = bool>, window: usize) -> Option<usize> {
    let mut run = 0;
    for (i, good) in ok.enumerate() {
        run = if good { run + 1 } else { 0 };
        if run == window {
            return Some(i + 1 - window);
        }
    }
    None
}

pub fn run_trials_sequential(spec: &ExperimentSpec, kind: AgentKind) -> Result<Vec<TrialRecord>> {
    (0..spec.trials).map(|t| run_trial(spec, kind, t)).collect()
}

#[cfg(feature = "parallel")]
pub fn run_trials_parallel(spec: &ExperimentSpec, kind: AgentKind) -> Result<Vec<TrialRecord>> {
    use rayon::prelude::*;
    (0..spec.trials).into_par_iter().map(|t| run_trial(spec, kind, t)).collect()
}

/// Runs all trials of one agent, on the current rayon pool when the
/// `parallel` feature is on.
pub fn run_trials(spec: &ExperimentSpec, kind: AgentKind) -> Result<Vec<TrialRecord>> {
    #[cfg(feature = "parallel")]
    {
        run_trials_parallel(spec, kind)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_trials_sequential(spec, kind)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DriftConvergence {
    pub drift_episode: usize,
    /// Over the trials that converged.
    pub episodes: Option<Estimate>,
    pub converged: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AgentSummary {
    pub agent: AgentKind,
    pub trials: usize,
    pub convergence: Vec<DriftConvergence>,
    pub total_steps: Estimate,
    pub mean_detections: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunSummary {
    pub morphin: AgentSummary,
    pub baseline: AgentSummary,
    /// Welch test on total steps, adaptive agent first.
    pub total_steps_test: Option<WelchTest>,
    /// Baseline mean total steps over the adaptive agent's.
    pub efficiency_ratio: f64,
}

fn summarize_agent(drifts: &[usize], records: &[TrialRecord]) -> Result<AgentSummary> {
    let first = records
        .first()
        .ok_or_else(|| Error::Input("no trial records to summarize".into()))?;
    let convergence = drifts
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let hits: Vec<f64> = records
                .iter()
                .filter_map(|r| r.convergence.get(i).copied().flatten())
                .map(|n| n as f64)
                .collect();
            DriftConvergence {
                drift_episode: d,
                episodes: Estimate::of(&hits),
                converged: hits.len(),
                failures: records.len() - hits.len(),
            }
        })
        .collect();
    let totals: Vec<f64> = records.iter().map(|r| r.total_steps as f64).collect();
    Ok(AgentSummary {
        agent: first.agent,
        trials: records.len(),
        convergence,
        total_steps: Estimate::of(&totals).expect("non-empty"),
        mean_detections: records.iter().map(|r| r.detections().count() as f64).sum::<f64>() / records.len() as f64,
    })
}

/// Aggregates both agents' trials into the comparison table.
pub fn summarize(
    drifts: &[usize],
    morphin: &[TrialRecord],
    baseline: &[TrialRecord],
) -> Result<RunSummary> {
    if morphin.len() != baseline.len() {
        return Err(Error::Input(format!(
            "unequal trial counts ({} vs {})",
            morphin.len(),
            baseline.len()
        )));
    }
    let m = summarize_agent(drifts, morphin)?;
    let b = summarize_agent(drifts, baseline)?;
    let totals = |rs: &[TrialRecord]| rs.iter().map(|r| r.total_steps as f64).collect::<Vec<_>>();
    Ok(RunSummary {
        total_steps_test: stats::welch_t_test(&totals(morphin), &totals(baseline)),
        efficiency_ratio: b.total_steps.mean / m.total_steps.mean,
        morphin: m,
        baseline: b,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub morphin: Vec<TrialRecord>,
    pub baseline: Vec<TrialRecord>,
    pub summary: RunSummary,
}

/// Validates the spec, runs both agents and summarizes.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let morphin = run_trials(spec, AgentKind::Morphin)?;
    let baseline = run_trials(spec, AgentKind::Baseline)?;
    let summary = summarize(&spec.drift_episodes(), &morphin, &baseline)?;
    Ok(ExperimentResult {
        morphin,
        baseline,
        summary,
    })
}
