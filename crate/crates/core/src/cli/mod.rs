//! Command-line front end.
//!
//! Every subcommand is a pure function of its input files, flags and
//! `--seed`: repeating a run reproduces its outputs byte for byte. JSON
//! outputs embed a `provenance` object (seed, config hash, crate version);
//! CSV outputs get a `<file>.meta.json` sidecar with the same fields plus the
//! event horizon and type count where relevant.
//!
//! Flags may also come from a `--config` file of `key = value` lines, keys
//! being long flag names. Flags on the command line override the file.
//! Boolean flags take `true`/`false`; multi-valued flags take
//! whitespace-separated values.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numerical failure.
//! Errors are printed to standard error as one JSON object per line.

mod commands;
mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use report::{block_summary, BlockMeans, BlockSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "contagion", version, about = "Hawkes-process contagion toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract extreme-event sequences from daily return CSVs.
    Extract(ExtractArgs),
    /// Fit a Hawkes model to an event CSV.
    Fit(FitArgs),
    /// Simulate events from a model JSON.
    Simulate(SimulateArgs),
    /// Time-rescaling diagnostics for a model on an event CSV.
    Gof(GofArgs),
    /// Conditional intensity path on a time grid.
    Intensity(IntensityArgs),
    /// Block summary of six-type fit reports.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Key-value configuration file; command-line flags override it.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Root seed for every random draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExtractArgs {
    /// Returns CSVs (`date,return_pct`). Several files are merged with all up
    /// types first, then all down types, in the order given.
    #[arg(long, num_args = 1.., required = true)]
    #[serde(skip)]
    pub returns: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub q_low: f64,
    #[arg(long, default_value_t = 0.9)]
    pub q_high: f64,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ModeArg {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum LinkArg {
    Identity,
    Floored,
    Softplus,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ScheduleArg {
    Constant,
    Cosine,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EventInput {
    /// Event CSV (`t,mark`).
    #[arg(long)]
    #[serde(skip)]
    pub events: PathBuf,
    /// Observation horizon; defaults to the sidecar value, else one bar past
    /// the last event.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Number of event types; defaults to the sidecar value, else the largest
    /// mark plus one.
    #[arg(long)]
    pub num_types: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: EventInput,
    #[arg(long, value_enum, default_value_t = ModeArg::Linear)]
    pub mode: ModeArg,
    /// Defaults to `identity` for linear and `floored` for nonlinear fits.
    #[arg(long, value_enum)]
    pub link: Option<LinkArg>,
    #[arg(long, default_value_t = crate::model::DEFAULT_FLOOR)]
    pub floor: f64,
    /// Fixed decay rate.
    #[arg(long, default_value_t = 0.1, conflicts_with_all = ["train_omega", "omega_grid"])]
    pub omega: f64,
    /// Optimize the decay rate together with the other parameters.
    #[arg(long)]
    pub train_omega: bool,
    /// Choose the decay rate from this grid by held-out likelihood.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub omega_grid: Option<Vec<f64>>,
    /// Share of the horizon held out when searching `omega_grid`.
    #[arg(long, default_value_t = 0.15)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    /// Monte-Carlo samples per type per epoch.
    #[arg(long, default_value_t = 1000)]
    pub mc_samples: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Sgd)]
    pub optimizer: OptimizerArg,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Constant)]
    pub schedule: ScheduleArg,
    /// Final learning rate as a fraction of `lr` under the cosine schedule.
    #[arg(long, default_value_t = 0.01)]
    pub final_lr_factor: f64,
    /// Fit only this period of the sequence cut into `period_length` bars.
    #[arg(long, requires = "period_length")]
    pub period: Option<usize>,
    #[arg(long, requires = "period")]
    pub period_length: Option<f64>,
    /// Output JSON report.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Model JSON (a fit report also works).
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
    #[arg(long)]
    pub horizon: f64,
    /// Output event CSV.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GofArgs {
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: EventInput,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IntensityArgs {
    #[arg(long)]
    #[serde(skip)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: EventInput,
    /// Grid as `start:end:step`; defaults to every bar `0:horizon:1`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Output CSV.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// Six-type fit reports or model JSONs.
    #[arg(long, num_args = 1.., required = true)]
    #[serde(skip)]
    pub fits: Vec<PathBuf>,
    /// Output JSON.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

/// Seed, settings hash and version stamped on every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

impl Provenance {
    /// Hashes the serialized settings of a command. File paths are not part
    /// of the settings, so the same run from another directory matches.
    pub fn new(command: &str, seed: u64, settings: &impl Serialize) -> Self {
        let body = serde_json::json!({ "command": command, "settings": settings });
        let digest = Sha256::digest(body.to_string().as_bytes());
        Self {
            seed,
            config_hash: hex::encode(digest),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Parses `key = value` lines into flag arguments for `subcommand`.
pub fn config_file_args(text: &str, subcommand: &str, path: &Path) -> Result<Vec<OsString>> {
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(subcommand).ok_or_else(|| {
        Error::InvalidArgument(format!("unknown subcommand `{subcommand}`"))
    })?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(parse_err("a config file cannot include another".into()));
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| parse_err(format!("unknown key `{key}` for `{subcommand}`")))?;
        if matches!(arg.get_action(), clap::ArgAction::SetTrue) {
            match value {
                "true" => out.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => return Err(parse_err(format!("`{key}` takes true or false"))),
            }
        } else {
            out.push(OsString::from(format!("--{key}")));
            out.extend(value.split_whitespace().map(OsString::from));
        }
    }
    Ok(out)
}

/// Splices config-file flags in front of the command-line flags, so the
/// latter win.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let pos = args
        .iter()
        .position(|a| a == "--config" || a.to_string_lossy().starts_with("--config="));
    let Some(pos) = pos else { return Ok(args) };
    let path = match args[pos].to_string_lossy().strip_prefix("--config=") {
        Some(p) => PathBuf::from(p),
        None => match args.get(pos + 1) {
            Some(p) => PathBuf::from(p),
            None => return Ok(args),
        },
    };
    let Some(sub) = args.get(1).map(|s| s.to_string_lossy().into_owned()) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    let extra = config_file_args(&text, &sub, &path)?;
    let mut merged = args[..2].to_vec();
    merged.extend(extra);
    merged.extend(args[2..].iter().cloned());
    Ok(merged)
}

fn error_line(kind: &str, message: &str, exit_code: i32, extra: Option<(&str, serde_json::Value)>) -> String {
    let mut obj = serde_json::json!({
        "error": kind,
        "message": message,
        "exit_code": exit_code,
    });
    if let Some((key, value)) = extra {
        obj[key] = value;
    }
    obj.to_string()
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

fn report_error(err: &Error) -> i32 {
    let code = exit_code(err);
    let extra = match err {
        Error::NonFinite { partial_trace, .. } => Some(("partial_trace", serde_json::json!(partial_trace))),
        _ => None,
    };
    eprintln!("{}", error_line(err.kind(), &err.to_string(), code, extra));
    code
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_with_args(args: Vec<OsString>) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => return report_error(&e),
    };
    let cli = match Cli::command()
        .args_override_self(true)
        .try_get_matches_from(args)
        .and_then(|m| <Cli as clap::FromArgMatches>::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let message = e.render().to_string();
            eprintln!("{}", error_line("usage", message.trim(), EXIT_INPUT, None));
            return EXIT_INPUT;
        }
    };
    match commands::run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(&e),
    }
}

pub fn run() -> i32 {
    run_with_args(std::env::args_os().collect())
}
