//! `qagg` command-line front end.
//!
//! Every command reads one network document (or, for `simulate`, a swap
//! schedule) and writes one report. JSON reports share an envelope:
//!
//! ```json
//! {"schema": "qagg.report/1", "tool": {"name": "qagg", "version": "..."},
//!  "command": "flow", "input": {"sha256": "..."}, "seed": 0,
//!  "params": {...}, "result": {...}}
//! ```
//!
//! Keys are emitted in sorted order and nothing depends on the clock or the
//! input path, so the same input and seed always give the same bytes.
//! Costs in JSON are integer milli-units; text output shows them in units
//! with three decimals.

mod commands;
mod render;

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use qagg_core::concat::ConcatError;
use qagg_core::pathplan::PlanError;
use qagg_core::rates::RateError;
use qagg_core::stabsim::SimError;
use qagg_core::{FlowError, GraphError, Prob};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA: &str = "qagg.report/1";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_TRIALS: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// s–t min-cut and a minimum cut.
    Mincut,
    /// Minimum-cost flow for `--target` ebits (default: the min-cut).
    Flow,
    /// Minimum-cost flow at the min-cut value.
    Maxflow,
    /// Cost and unit price for every target, plus the cheapest per ebit.
    PriceScan,
    /// Flow, path bundles, channel uses and the swap schedule.
    Plan,
    /// Run a swap schedule under noise and report fidelities and bounds.
    Simulate,
    /// Aggregate a hierarchical network one level up.
    Concat,
    /// Asymptotic rate from per-edge channel models.
    Rate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mincut => "mincut",
            Command::Flow => "flow",
            Command::Maxflow => "maxflow",
            Command::PriceScan => "price-scan",
            Command::Plan => "plan",
            Command::Simulate => "simulate",
            Command::Concat => "concat",
            Command::Rate => "rate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
    Text,
}

fn parse_prob(s: &str) -> Result<Prob, String> {
    Prob::parse(s).ok_or_else(|| format!("expected a non-negative decimal or p/q, got {s:?}"))
}

#[derive(Clone, Debug, Parser)]
#[command(name = "qagg", version, about = "Minimum-cost entanglement aggregation")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// Network document (JSON), or a swap schedule for `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Ebits to deliver: F* for flow/plan/simulate, Ψ* for concat.
    #[arg(long, allow_negative_numbers = true)]
    pub target: Option<i64>,
    /// Per-swap two-qubit depolarizing probability (default 0).
    #[arg(long, alias = "noise", value_parser = parse_prob)]
    pub noise_p: Option<Prob>,
    /// δ_e for edges that do not set `delta` (default 0).
    #[arg(long, value_parser = parse_prob)]
    pub delta_default: Option<Prob>,
    /// Monte-Carlo trials for simulate (default 1000).
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, env = "QAGG_FORMAT", default_value = "json")]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Swap schedule for simulate, with `--input` supplying the network.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command, input: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            input: input.into(),
            target: None,
            noise_p: None,
            delta_default: None,
            trials: None,
            seed: 0,
            format: Format::Json,
            output: None,
            schedule: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Usage,
    Validation,
    Infeasible,
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Io | ErrorKind::Internal => 1,
            ErrorKind::Usage => 2,
            ErrorKind::Validation => 3,
            ErrorKind::Infeasible => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ErrorKind::Io => "io",
            ErrorKind::Usage => "usage",
            ErrorKind::Validation => "validation",
            ErrorKind::Infeasible => "infeasible",
            ErrorKind::Internal => "internal",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, message)
    }

    pub fn validation(message: impl ToString) -> Self {
        Self::new(ErrorKind::Validation, message.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// One-line JSON written to stderr.
    pub fn to_json(&self) -> String {
        json!({"error": {"kind": self.kind.name(), "message": self.message, "exit_code": self.exit_code()}}).to_string()
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::validation(e)
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        CliError::new(ErrorKind::Infeasible, e.to_string())
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        CliError::validation(e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::validation(e)
    }
}

impl From<ConcatError> for CliError {
    fn from(e: ConcatError) -> Self {
        match &e {
            ConcatError::Flow { at, .. } if at == "top level" => CliError::new(ErrorKind::Infeasible, e.to_string()),
            _ => CliError::validation(e),
        }
    }
}

impl From<RateError> for CliError {
    fn from(e: RateError) -> Self {
        match e {
            RateError::CrossCheck { .. } => CliError::new(ErrorKind::Internal, e.to_string()),
            _ => CliError::validation(e),
        }
    }
}

/// One input file: raw text plus its digest.
pub(crate) struct Input {
    pub text: String,
    pub sha256: String,
}

pub(crate) fn read_input(path: &PathBuf) -> Result<Input, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::new(ErrorKind::Io, format!("{}: {e}", path.display())))?;
    let sha256 = format!("{:x}", Sha256::digest(&bytes));
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::validation(format!("{}: input is not UTF-8", path.display())))?;
    Ok(Input { text, sha256 })
}

/// What a command produced, before the envelope is added.
pub(crate) struct Output {
    pub result: Value,
    pub text: String,
    /// Flow rendering, when the command has a network to draw.
    pub dot: Option<String>,
}

fn check_flags(cfg: &RunConfig) -> Result<(), CliError> {
    use Command::*;
    let c = cfg.command;
    let reject = |flag: &str, given: bool, allowed: &[Command]| {
        if given && !allowed.contains(&c) {
            Err(CliError::usage(format!("{} does not take --{flag}", c.name())))
        } else {
            Ok(())
        }
    };
    reject("target", cfg.target.is_some(), &[Flow, Plan, Simulate, Concat])?;
    reject("noise-p", cfg.noise_p.is_some(), &[Simulate, Concat])?;
    reject("delta-default", cfg.delta_default.is_some(), &[Flow, Maxflow, PriceScan, Plan, Simulate])?;
    reject("trials", cfg.trials.is_some(), &[Simulate])?;
    reject("schedule", cfg.schedule.is_some(), &[Simulate])?;
    if cfg.trials == Some(0) {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    Ok(())
}

fn params(cfg: &RunConfig) -> Value {
    let mut p = serde_json::Map::new();
    if let Some(t) = cfg.target {
        p.insert("target".into(), json!(t));
    }
    if matches!(cfg.command, Command::Simulate | Command::Concat) {
        p.insert("noise_p".into(), json!(cfg.noise_p.clone().unwrap_or_else(Prob::zero)));
    }
    if let Some(d) = &cfg.delta_default {
        p.insert("delta_default".into(), json!(d));
    }
    if cfg.command == Command::Simulate {
        p.insert("trials".into(), json!(cfg.trials.unwrap_or(DEFAULT_TRIALS)));
    }
    Value::Object(p)
}

/// Runs one command and returns the rendered report.
pub fn execute(cfg: &RunConfig) -> Result<String, CliError> {
    check_flags(cfg)?;
    let input = read_input(&cfg.input)?;
    let schedule = cfg.schedule.as_ref().map(read_input).transpose()?;
    let out = commands::dispatch(cfg, &input, schedule.as_ref())?;

    let mut digest = json!({"sha256": input.sha256});
    if let Some(s) = &schedule {
        digest["schedule_sha256"] = json!(s.sha256);
    }
    let header = [
        format!("qagg {VERSION} {}", cfg.command.name()),
        format!("input sha256 {}", input.sha256),
        format!("seed {}", cfg.seed),
    ];
    Ok(match cfg.format {
        Format::Json => {
            let report = json!({
                "schema": SCHEMA,
                "tool": {"name": "qagg", "version": VERSION},
                "command": cfg.command.name(),
                "input": digest,
                "seed": cfg.seed,
                "params": params(cfg),
                "result": out.result,
            });
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut s: String = header.iter().map(|h| format!("# {h}\n")).collect();
            s.push_str(&out.text);
            s
        }
        Format::Dot => {
            let dot = out
                .dot
                .ok_or_else(|| CliError::usage(format!("{} has no network to render as DOT", cfg.command.name())))?;
            let mut s: String = header.iter().map(|h| format!("// {h}\n")).collect();
            s.push_str(&dot);
            s
        }
    })
}

/// Runs `cfg`, writes the report, and returns the process exit status.
/// Failures print one JSON error object on stderr.
pub fn run(cfg: &RunConfig) -> i32 {
    let written = execute(cfg).and_then(|report| match &cfg.output {
        Some(path) => {
            fs::write(path, report).map_err(|e| CliError::new(ErrorKind::Io, format!("{}: {e}", path.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(report.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::new(ErrorKind::Io, e.to_string()))
        }
    });
    match written {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
