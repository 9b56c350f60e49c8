//! `morphin` command line.
//!
//! Exit codes: 0 success, 1 a trial aborted, 2 bad config or input,
//! 3 I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::config::{builtin, parse_override, ExperimentSpec, Scenario};
use crate::drift;
use crate::error::{Error, Result};
use crate::harness;
use crate::output;

#[derive(Debug, Parser)]
#[command(name = "morphin", version, about = "Drift-adaptive Q-learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run both agents on a scenario and write results.
    Run(RunArgs),
    /// Parse and check an experiment file without running it.
    ValidateConfig(ConfigArgs),
    /// Run the Page-Hinkley detector over one CSV column.
    PhTrace(PhTraceArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment file, or the name of a built-in one (e.g. gridworld_goals_desk).
    #[arg(long)]
    pub config: String,
    /// Override a config key, e.g. `--set morphin.ph.threshold_h=200`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Worker threads for trials.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PhTraceArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Column name to read; defaults to the first column.
    #[arg(long)]
    pub column: Option<String>,
    /// Trace destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Take detector parameters from this experiment's `morphin.ph`.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

fn load_spec(args: &ConfigArgs) -> Result<ExperimentSpec> {
    let text = read_config_text(&args.config)?;
    let mut overrides = args
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(t) = args.trials {
        overrides.push(("trials".into(), t.to_string()));
    }
    if let Some(e) = args.episodes {
        overrides.push(("episodes".into(), e.to_string()));
    }
    if let Some(s) = args.seed {
        overrides.push(("base_seed".into(), s.to_string()));
    }
    ExperimentSpec::from_toml(&text, &overrides)
}

fn read_config_text(name: &str) -> Result<String> {
    let path = Path::new(name);
    if path.exists() {
        return std::fs::read_to_string(path).map_err(|e| Error::io(path, e));
    }
    if let Some(text) = builtin(name) {
        return Ok(text.to_owned());
    }
    Err(Error::io(
        path,
        std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or built-in config"),
    ))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Input(_) | Error::Contract(_) => 2,
        Error::Io { .. } => 3,
        Error::Trial { .. } => 1,
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn run(args: &RunArgs) -> Result<()> {
    let spec = load_spec(&args.config)?;
    eprintln!(
        "running {} : {} trials x {} episodes per agent",
        spec.scenario.name(),
        spec.trials,
        spec.episodes
    );
    let result = with_pool(args.parallelism, || harness::run_experiment(&spec))?;
    output::write_all(&args.out, &spec, &result, now_unix())?;
    print!("{}", output::render_table(&spec, &result.summary));
    eprintln!("results written to {}", args.out.display());
    Ok(())
}

#[cfg(feature = "parallel")]
fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(Error::config("--parallelism", "must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Input(e.to_string()))?
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_pool<T>(threads: Option<usize>, f: impl FnOnce() -> Result<T>) -> Result<T> {
    if threads == Some(0) {
        return Err(Error::config("--parallelism", "must be >= 1"));
    }
    f()
}

fn validate(args: &ConfigArgs) -> Result<()> {
    let spec = load_spec(args)?;
    println!(
        "ok: {} ({} trials x {} episodes, drifts at {:?})",
        spec.scenario.name(),
        spec.trials,
        spec.episodes,
        spec.drift_episodes()
    );
    Ok(())
}

fn read_column(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?
        .clone();
    let idx = match column {
        None => 0,
        Some(name) => headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Input(format!("{}: no column `{name}`", path.display())))?,
    };
    let mut values = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let raw = row
            .get(idx)
            .ok_or_else(|| Error::Input(format!("{}: row {} is too short", path.display(), i + 2)))?;
        let v: f64 = raw
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("{}: row {}: `{raw}` is not a number", path.display(), i + 2)))?;
        if !v.is_finite() {
            return Err(Error::Input(format!("{}: row {}: non-finite value", path.display(), i + 2)));
        }
        values.push(v);
    }
    Ok(values)
}

fn ph_trace(args: &PhTraceArgs) -> Result<()> {
    let ph = match &args.config {
        Some(c) => {
            load_spec(&ConfigArgs {
                config: c.clone(),
                overrides: args.overrides.clone(),
                trials: None,
                episodes: None,
                seed: None,
            })?
            .morphin
            .ph
        }
        None => {
            let overrides = args
                .overrides
                .iter()
                .map(|s| parse_override(s))
                .collect::<Result<Vec<_>>>()?;
            let doc = format!("scenario = \"{}\"", Scenario::GridworldGoals.name());
            ExperimentSpec::from_toml(&doc, &overrides)?.morphin.ph
        }
    };
    let values = read_column(&args.input, args.column.as_deref())?;
    let rows = drift::trace(&ph, &values)?;
    let header = [
        ("delta", ph.delta.to_string()),
        ("threshold_h", ph.threshold_h.to_string()),
        ("direction", ph.direction.name().to_string()),
        ("min_samples", ph.min_samples.to_string()),
    ];
    match &args.out {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            output::write_detector_trace(std::io::BufWriter::new(f), &header, &rows)?;
        }
        None => {
            let stdout = std::io::stdout();
            output::write_detector_trace(stdout.lock(), &header, &rows)?;
        }
    }
    let alarms = rows.iter().filter(|r| r.drift_flag).count();
    eprintln!("{} observations, {alarms} alarm(s)", rows.len());
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::ValidateConfig(a) => validate(a),
        Command::PhTrace(a) => ph_trace(a),
    };
    match result {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
