//! Command-line frontend.
//!
//! Exit codes: `0` success or satisfied bound, `1` violated bound or invalid
//! process, `2` usage, parse or I/O error. Results go to stdout (or `--out`)
//! as JSON; the effective seed is logged to stderr so stdout stays
//! byte-identical across reruns.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::capacity::{
    capacity_chain, check_bidirectional_bound, check_multiparty_bound, holevo_of_process_joint, one_shot_capacity,
    CapacityReport, OptimizerConfig,
};
use crate::error::Error;
use crate::link::{gamma, induced_channel, CPMap};
use crate::process::multipartite::MultipartiteSeparableProcess;
use crate::process::{validate_process, Direction, ProcessDims, ProcessMatrix, SeparableProcess, DEFAULT_TOL};
use crate::search::{run_search_on_process_with, run_search_with, InstrumentMode, SearchConfig, TrialRecord};
use crate::tensor::LabeledOperator;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "causal-capacity", version, about = "Process matrices and classical capacity bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check every validity constraint of a process matrix.
    Validate {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Induced channel `W * (A ⊗ B)` from Alice's ancilla input to Bob's ancilla output.
    Compose {
        #[command(flatten)]
        io: Io,
        /// Alice's CP map (JSON with `in`/`out` labels).
        #[arg(long)]
        alice: PathBuf,
        /// Bob's CP map.
        #[arg(long)]
        bob: PathBuf,
    },
    /// State reaching the receiver for a given encoding channel.
    Gamma {
        #[command(flatten)]
        io: Io,
        /// Encoding channel `A_I -> A_O` (in the oriented frame).
        #[arg(long)]
        encoding: PathBuf,
        #[arg(long, value_enum, default_value_t = DirectionArg::AToB)]
        direction: DirectionArg,
    },
    /// Holevo quantity estimate, optionally with two-copy joint encoding.
    Holevo {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long, value_enum, default_value_t = DirectionArg::AToB)]
        direction: DirectionArg,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        n: u8,
    },
    /// One-shot capacity estimate.
    Capacity {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long, value_enum, default_value_t = DirectionArg::AToB)]
        direction: DirectionArg,
    },
    /// Every estimate of the capacity chain and its ordering check.
    Chain {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long, value_enum, default_value_t = DirectionArg::AToB)]
        direction: DirectionArg,
    },
    /// Bidirectional bound for `{lambda, w_b_first, w_a_first}`.
    BoundBidir {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Multiparty bound for `{parties, terms: [{weight, order, process}]}`.
    BoundMulti {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Randomised search for entropic causal-inequality violations.
    Search {
        /// Fixed operator to search instruments for (default: sample separable processes).
        #[arg(short, long)]
        input: Option<PathBuf>,
        /// Write results here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Local dimension of every system.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Minimum weight of the uniform process in sampled terms [default: 0.05].
        #[arg(long)]
        noise_floor: Option<f64>,
        /// Instrument family [default: per-direction].
        #[arg(long, value_enum)]
        instrument_mode: Option<ModeArg>,
        /// Skip the bidirectional capacity check on each trial.
        #[arg(long)]
        no_bidirectional: bool,
        /// Also write the histogram as CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[command(flatten)]
        opt: OptArgs,
    },
}

#[derive(Args, Debug)]
pub struct Io {
    /// Input JSON (a process matrix unless the command says otherwise).
    #[arg(short, long)]
    pub input: PathBuf,
    /// Write results here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug, Default)]
pub struct OptArgs {
    /// JSON optimiser config; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Independent optimiser restarts (seeds `seed..seed + restarts`).
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Local-search steps per restart.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Base seed; search trial `i` uses `seed + i`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Inner Blahut–Arimoto tolerance (bits).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    AToB,
    BToA,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::AToB => Direction::AToB,
            DirectionArg::BToA => Direction::BToA,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Fixed,
    PerDirection,
}

/// Failure of a command, mapped onto an exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidProcess(_) => Failure::Invalid(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type CmdResult = std::result::Result<Outcome, Failure>;

/// Text to emit plus whether the checked property held.
struct Outcome {
    body: String,
    ok: bool,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("cannot parse {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialise");
    s.push('\n');
    s
}

fn optimizer(args: &OptArgs, base: OptimizerConfig) -> std::result::Result<OptimizerConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => read_json(p)?,
        None => base,
    };
    if let Some(r) = args.restarts {
        cfg.restarts = r;
    }
    if let Some(s) = args.steps {
        cfg.steps = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.tol {
        cfg.tol = t;
    }
    Ok(cfg)
}

fn trace_csv(report: &CapacityReport) -> String {
    let mut out = String::from("restart_seed,value_bits\n");
    for (seed, v) in &report.optimizer_trace {
        out.push_str(&format!("{seed},{v}\n"));
    }
    out
}

fn csv_unsupported(command: &str) -> Failure {
    Failure::Usage(format!("--format csv is not available for `{command}`"))
}

fn report_outcome(report: &CapacityReport, format: Format) -> CmdResult {
    let body = match format {
        Format::Json => to_json(report),
        Format::Csv => trace_csv(report),
    };
    Ok(Outcome { body, ok: report.satisfied })
}

#[derive(Deserialize)]
struct SeparableInput {
    lambda: f64,
    w_b_first: ProcessMatrix,
    w_a_first: ProcessMatrix,
}

fn log_seed(stderr: &mut dyn Write, seed: u64) {
    let _ = writeln!(stderr, "seed: {seed}");
}

fn execute(cmd: Command, stderr: &mut dyn Write) -> std::result::Result<(Outcome, Option<PathBuf>), Failure> {
    let (outcome, out) = match cmd {
        Command::Validate { io, tol } => {
            let op: LabeledOperator = read_json(&io.input)?;
            let report = validate_process(&op, tol)?;
            let body = match io.format {
                Format::Json => to_json(&report),
                Format::Csv => {
                    let r = report.residuals;
                    format!(
                        "constraint,residual\npsd,{}\ntrace,{}\nalice_marginal,{}\nbob_marginal,{}\njoint_outputs,{}\n",
                        r.psd, r.trace, r.alice_marginal, r.bob_marginal, r.joint_outputs
                    )
                }
            };
            (Outcome { body, ok: report.valid }, io.out)
        }
        Command::Compose { io, alice, bob } => {
            if io.format == Format::Csv {
                return Err(csv_unsupported("compose"));
            }
            let w: ProcessMatrix = read_json(&io.input)?;
            let a: CPMap = read_json(&alice)?;
            let b: CPMap = read_json(&bob)?;
            let n = induced_channel(&a, &b, &w)?;
            (Outcome { body: to_json(&n), ok: true }, io.out)
        }
        Command::Gamma { io, encoding, direction } => {
            if io.format == Format::Csv {
                return Err(csv_unsupported("gamma"));
            }
            let w: ProcessMatrix = read_json(&io.input)?;
            let a: CPMap = read_json(&encoding)?;
            let g = gamma(&a, &w.oriented(direction.into()))?;
            (Outcome { body: to_json(&g), ok: true }, io.out)
        }
        Command::Holevo { io, opt, direction, n } => {
            let cfg = optimizer(&opt, OptimizerConfig::default())?;
            log_seed(stderr, cfg.seed);
            let w: ProcessMatrix = read_json(&io.input)?;
            let report = holevo_of_process_joint(&w, direction.into(), n as usize, &cfg)?;
            (report_outcome(&report, io.format)?, io.out)
        }
        Command::Capacity { io, opt, direction } => {
            let cfg = optimizer(&opt, OptimizerConfig::default())?;
            log_seed(stderr, cfg.seed);
            let w: ProcessMatrix = read_json(&io.input)?;
            let report = one_shot_capacity(&w, direction.into(), &cfg)?;
            (report_outcome(&report, io.format)?, io.out)
        }
        Command::Chain { io, opt, direction } => {
            if io.format == Format::Csv {
                return Err(csv_unsupported("chain"));
            }
            let cfg = optimizer(&opt, OptimizerConfig::default())?;
            log_seed(stderr, cfg.seed);
            let w: ProcessMatrix = read_json(&io.input)?;
            let chain = capacity_chain(&w, direction.into(), &cfg)?;
            (Outcome { body: to_json(&chain), ok: chain.holds }, io.out)
        }
        Command::BoundBidir { io, opt } => {
            if io.format == Format::Csv {
                return Err(csv_unsupported("bound-bidir"));
            }
            let cfg = optimizer(&opt, OptimizerConfig::default())?;
            log_seed(stderr, cfg.seed);
            let input: SeparableInput = read_json(&io.input)?;
            let sep = SeparableProcess::from_parts(input.lambda, input.w_b_first, input.w_a_first)?;
            let check = check_bidirectional_bound(&sep, &cfg)?;
            (Outcome { body: to_json(&check), ok: check.satisfied }, io.out)
        }
        Command::BoundMulti { io, opt } => {
            if io.format == Format::Csv {
                return Err(csv_unsupported("bound-multi"));
            }
            let cfg = optimizer(&opt, OptimizerConfig::default())?;
            log_seed(stderr, cfg.seed);
            let raw: MultipartiteSeparableProcess = read_json(&io.input)?;
            let msep = MultipartiteSeparableProcess::new(raw.parties, raw.terms, DEFAULT_TOL)?;
            let check = check_multiparty_bound(&msep, &cfg)?;
            (Outcome { body: to_json(&check), ok: check.satisfied }, io.out)
        }
        Command::Search { input, out, format, trials, dim, noise_floor, instrument_mode, no_bidirectional, histogram, opt } => {
            let defaults = SearchConfig::default();
            let cfg = SearchConfig {
                trials,
                dims: ProcessDims::uniform(dim),
                seed: opt.seed.unwrap_or(defaults.seed),
                instrument_mode: match instrument_mode {
                    Some(ModeArg::Fixed) => InstrumentMode::Fixed,
                    Some(ModeArg::PerDirection) => InstrumentMode::PerDirection,
                    None => defaults.instrument_mode,
                },
                optimizer: optimizer(&opt, defaults.optimizer.clone())?,
                noise_floor: noise_floor.unwrap_or(defaults.noise_floor),
                random_bases: defaults.random_bases,
                check_bidirectional: !no_bidirectional && input.is_none(),
            };
            let cfg = SearchConfig { seed: cfg.optimizer.seed, ..cfg };
            log_seed(stderr, cfg.seed);
            let mut lines = String::new();
            let mut push = |r: &TrialRecord| {
                lines.push_str(&serde_json::to_string(r).expect("records serialise"));
                lines.push('\n');
            };
            let result = match &input {
                Some(path) => {
                    let w: ProcessMatrix = read_json(path)?;
                    run_search_on_process_with(&w, &cfg, &mut push)?
                }
                None => run_search_with(&cfg, &mut push)?,
            };
            if let Some(path) = &histogram {
                write_file(path, &result.histogram_csv())?;
            }
            let body = match format {
                Format::Json => {
                    let summary = serde_json::json!({ "summary": result });
                    format!("{lines}{}\n", serde_json::to_string(&summary).expect("summary serialises"))
                }
                Format::Csv => result.histogram_csv(),
            };
            (Outcome { body, ok: result.violations.is_empty() }, out)
        }
    };
    Ok((outcome, out))
}

fn write_file(path: &Path, body: &str) -> std::result::Result<(), Failure> {
    fs::write(path, body).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(rendered.as_bytes());
            } else {
                let _ = stdout.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match execute(cli.command, stderr) {
        Ok((outcome, out)) => {
            let written = match out {
                Some(path) => write_file(&path, &outcome.body),
                None => stdout
                    .write_all(outcome.body.as_bytes())
                    .map_err(|e| Failure::Usage(format!("cannot write output: {e}"))),
            };
            match written {
                Err(Failure::Usage(msg)) | Err(Failure::Invalid(msg)) => {
                    let _ = writeln!(stderr, "error: {msg}");
                    EXIT_USAGE
                }
                Ok(()) if outcome.ok => EXIT_OK,
                Ok(()) => EXIT_VIOLATED,
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Invalid(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_VIOLATED
        }
    }
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
