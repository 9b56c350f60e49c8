//! Self-adaptive tabular Q-learning for non-stationary environments.
//!
//! The crate pairs a Page-Hinkley change detector over per-episode rewards
//! with an exploration schedule that restarts on detected drift, a TD-error
//! driven learning rate, and Q-tables that grow new action rows at runtime
//! without touching learned values.
//!
//! Module map:
//!
//! * [`qcore`]: dense action-value tables and transition types.
//! * [`drift`]: streaming Page-Hinkley detector.
//! * [`agents`]: the adaptive agent and the fixed-schedule Q-learning baseline.
//! * [`envs`]: Gridworld and two-lane traffic intersection.
//! * [`harness`]: seeded multi-trial runner and convergence detection.
//! * [`stats`]: summary statistics and Welch's t-test.
//! * [`config`]: experiment files and `key=value` overrides.
//! * [`output`]: CSV/JSON persistence.
//! * [`cli`]: the `morphin` command-line entry point.

pub mod agents;
pub mod cli;
pub mod config;
pub mod drift;
pub mod envs;
pub mod error;
pub mod harness;
pub mod output;
pub mod qcore;
pub mod stats;

pub use agents::{Agent, AgentConfig, AgentKind, StepOutcome};
pub use drift::{Direction, PageHinkleyConfig, PageHinkleyState};
pub use error::{Error, Result};
pub use qcore::{ActionId, QTable, StateId, Transition};
