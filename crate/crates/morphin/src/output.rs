//! Result persistence and the plain-text comparison table.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::agents::AgentKind;
use crate::config::ExperimentSpec;
use crate::drift::TraceRow;
use crate::error::{Error, Result};
use crate::harness::{ExperimentResult, RunSummary, TrialRecord};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct TrialSeeds {
    trial: usize,
    morphin: u64,
    baseline: u64,
}

#[derive(Serialize)]
struct SeedInfo {
    base_seed: u64,
    derivation: &'static str,
    trials: Vec<TrialSeeds>,
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    tool: ToolInfo,
    generated_at_unix: u64,
    spec: &'a ExperimentSpec,
    seeds: SeedInfo,
    drift_episodes: Vec<usize>,
    summary: &'a RunSummary,
}

/// `summary.json` contents. `generated_at_unix` is the only field that
/// varies between identical runs.
pub fn summary_json(spec: &ExperimentSpec, result: &ExperimentResult, generated_at_unix: u64) -> Result<String> {
    let doc = SummaryDocument {
        tool: ToolInfo {
            name: TOOL_NAME,
            version: TOOL_VERSION,
        },
        generated_at_unix,
        spec,
        seeds: SeedInfo {
            base_seed: spec.base_seed,
            derivation: "splitmix64 chain over (base_seed, trial, agent)",
            trials: result
                .morphin
                .iter()
                .zip(&result.baseline)
                .map(|(m, b)| TrialSeeds {
                    trial: m.trial,
                    morphin: m.seed,
                    baseline: b.seed,
                })
                .collect(),
        },
        drift_episodes: spec.drift_episodes(),
        summary: &result.summary,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Input(e.to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Input(format!("{}: {other:?}", path.display())),
    }
}

fn opt(v: Option<usize>) -> String {
    v.map(|n| n.to_string()).unwrap_or_default()
}

/// One row per (trial, agent): totals and per-drift convergence episodes
/// (empty when the agent never converged).
pub fn write_trials_csv(path: &Path, spec: &ExperimentSpec, result: &ExperimentResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = csv_err(path);
    let drifts = spec.drift_episodes();
    let mut header = vec![
        "trial".to_string(),
        "agent".into(),
        "seed".into(),
        "total_steps".into(),
        "detections".into(),
        "expansions".into(),
    ];
    header.extend(drifts.iter().map(|d| format!("converge_after_{d}")));
    w.write_record(&header).map_err(&err)?;
    for rec in result.morphin.iter().chain(&result.baseline) {
        let mut row = vec![
            rec.trial.to_string(),
            rec.agent.to_string(),
            rec.seed.to_string(),
            rec.total_steps.to_string(),
            rec.detections().count().to_string(),
            rec.expansions.len().to_string(),
        ];
        row.extend(rec.convergence.iter().map(|c| opt(*c)));
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-episode `episode, reward, steps, epsilon, drift`.
pub fn write_series_csv(path: &Path, rec: &TrialRecord) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = csv_err(path);
    w.write_record(["episode", "reward", "steps", "epsilon", "drift"]).map_err(&err)?;
    for e in 0..rec.steps_taken.len() {
        w.write_record([
            e.to_string(),
            rec.episode_reward[e].to_string(),
            rec.steps_taken[e].to_string(),
            format!("{:.6}", rec.epsilon_at_start[e]),
            u8::from(rec.drift_flags[e]).to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Detector trace CSV, optionally preceded by `# key=value` comment lines.
pub fn write_detector_trace<W: Write>(out: W, header: &[(&str, String)], rows: &[TraceRow]) -> Result<()> {
    let mut out = out;
    for (k, v) in header {
        writeln!(out, "# {k}={v}").map_err(|e| Error::io("<trace>", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Input(e.to_string());
    w.write_record(["episode", "x", "running_mean", "cum_dec", "cum_inc", "drift_flag"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            r.x.to_string(),
            r.running_mean.to_string(),
            r.cum_dec.to_string(),
            r.cum_inc.to_string(),
            u8::from(r.drift_flag).to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))
}

fn write_step_trace(path: &Path, rec: &TrialRecord) -> Result<()> {
    let Some(rows) = &rec.step_trace else {
        return Ok(());
    };
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = csv_err(path);
    for r in rows {
        w.serialize(r).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every artifact of a run under `dir`.
pub fn write_all(dir: &Path, spec: &ExperimentSpec, result: &ExperimentResult, generated_at_unix: u64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let summary = summary_json(spec, result, generated_at_unix)?;
    let path = dir.join("summary.json");
    fs::write(&path, summary + "\n").map_err(|e| Error::io(&path, e))?;
    write_trials_csv(&dir.join("trials.csv"), spec, result)?;

    for rec in result.morphin.iter().chain(&result.baseline) {
        let stem = format!("{}_{}", rec.agent, rec.trial);
        if spec.output.series {
            write_series_csv(&dir.join("series").join(format!("{stem}.csv")), rec)?;
        }
        if spec.output.q_tables {
            let path = dir.join("qtables").join(format!("{stem}.csv"));
            rec.final_q.write_csv(create(&path)?)?;
        }
        if let Some(rows) = &rec.detector_trace {
            let path = dir.join("detector").join(format!("{stem}.csv"));
            write_detector_trace(create(&path)?, &[], rows)?;
        }
        write_step_trace(&dir.join("steps").join(format!("{stem}.csv")), rec)?;
    }
    Ok(())
}

fn ordinal(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (1, 11) | (2, 12) | (3, 13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn cell(est: Option<&crate::stats::Estimate>) -> String {
    match est {
        None => "--".into(),
        Some(e) => match e.spread_pct {
            Some(p) => format!("{:.2} ± {:.2}% (n={})", e.mean, p, e.n),
            None => format!("{:.2} (n={})", e.mean, e.n),
        },
    }
}

/// Comparison table: convergence per drift and total steps per agent.
pub fn render_table(spec: &ExperimentSpec, summary: &RunSummary) -> String {
    let drifts = spec.drift_episodes();
    let mut header = vec!["Agent".to_string()];
    header.extend(drifts.iter().enumerate().map(|(i, d)| format!("{} drift (ep {d})", ordinal(i + 1))));
    header.push("Total steps".into());

    let mut rows = vec![header];
    for (kind, s) in [(AgentKind::Baseline, &summary.baseline), (AgentKind::Morphin, &summary.morphin)] {
        let mut row = vec![kind.to_string()];
        row.extend(s.convergence.iter().map(|c| cell(c.episodes.as_ref())));
        row.push(cell(Some(&s.total_steps)));
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{v:<w$}", w = *w))
            .collect();
        let _ = writeln!(out, "{}", line.join(" | ").trim_end());
        if i == 0 {
            let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
        }
    }
    let _ = writeln!(out);
    match &summary.total_steps_test {
        Some(w) => {
            let _ = writeln!(out, "Welch t-test on total steps: t = {:.3}, df = {:.1}, p = {:.3e}", w.t, w.df, w.p_value);
        }
        None => {
            let _ = writeln!(out, "Welch t-test on total steps: n/a (fewer than 2 trials)");
        }
    }
    let _ = writeln!(out, "Efficiency ratio (baseline / morphin total steps): {:.2}x", summary.efficiency_ratio);
    out
}
