//! Streaming Page-Hinkley change detector.
//!
//! Each observation updates the running mean and two clamped cumulants:
//!
//! ```text
//! cum_dec <- max(0, cum_dec + (mean - x - delta))   // mean dropping
//! cum_inc <- max(0, cum_inc + (x - mean - delta))   // mean rising
//! ```
//!
//! An alarm is raised once more than `min_samples` observations have been
//! seen and the cumulant(s) selected by [`Direction`] exceed `threshold_h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    DecreaseOnly,
    IncreaseOnly,
    #[default]
    TwoSided,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::DecreaseOnly => "decrease_only",
            Direction::IncreaseOnly => "increase_only",
            Direction::TwoSided => "two_sided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PageHinkleyConfig {
    /// Magnitude tolerance, in units of the observed signal.
    pub delta: f64,
    /// Alarm threshold H. `inf` disables alarms.
    pub threshold_h: f64,
    pub direction: Direction,
    /// Observations required before any alarm may fire.
    pub min_samples: usize,
}

impl Default for PageHinkleyConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            threshold_h: 300.0,
            direction: Direction::TwoSided,
            min_samples: 30,
        }
    }
}

impl PageHinkleyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::config("ph.delta", "must be finite and >= 0"));
        }
        if self.threshold_h.is_nan() || self.threshold_h <= 0.0 {
            return Err(Error::config("ph.threshold_h", "must be > 0"));
        }
        Ok(())
    }
}

/// Detector state since the last reset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PageHinkleyState {
    pub sample_count: usize,
    pub running_mean: f64,
    pub cum_dec: f64,
    pub cum_inc: f64,
}

impl PageHinkleyState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one observation and reports whether the detector alarms.
    pub fn update(&mut self, cfg: &PageHinkleyConfig, x: f64) -> Result<bool> {
        if !x.is_finite() {
            return Err(Error::contract(format!(
                "Page-Hinkley observation must be finite, got {x}"
            )));
        }
        self.sample_count += 1;
        self.running_mean += (x - self.running_mean) / self.sample_count as f64;
        self.cum_dec = (self.cum_dec + (self.running_mean - x - cfg.delta)).max(0.0);
        self.cum_inc = (self.cum_inc + (x - self.running_mean - cfg.delta)).max(0.0);
        Ok(self.alarm(cfg))
    }

    fn alarm(&self, cfg: &PageHinkleyConfig) -> bool {
        if self.sample_count <= cfg.min_samples {
            return false;
        }
        let h = cfg.threshold_h;
        match cfg.direction {
            Direction::DecreaseOnly => self.cum_dec > h,
            Direction::IncreaseOnly => self.cum_inc > h,
            Direction::TwoSided => self.cum_dec > h || self.cum_inc > h,
        }
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// One row of a detector trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub episode: usize,
    pub x: f64,
    pub running_mean: f64,
    pub cum_dec: f64,
    pub cum_inc: f64,
    pub drift_flag: bool,
}

/// Runs a detector over `values`, resetting after every alarm the way the
/// adaptive agent does. Rows hold the state before any reset.
pub fn trace(cfg: &PageHinkleyConfig, values: &[f64]) -> Result<Vec<TraceRow>> {
    let mut state = PageHinkleyState::new();
    let mut rows = Vec::with_capacity(values.len());
    for (episode, &x) in values.iter().enumerate() {
        let drift_flag = state.update(cfg, x)?;
        rows.push(TraceRow {
            episode,
            x,
            running_mean: state.running_mean,
            cum_dec: state.cum_dec,
            cum_inc: state.cum_inc,
            drift_flag,
        });
        if drift_flag {
            state.reset();
        }
    }
    Ok(rows)
}
