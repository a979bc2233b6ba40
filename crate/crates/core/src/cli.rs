//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 when a flag fails validation, 1 when a run
//! fails after its flags were accepted.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bitflip;
use crate::c4c6::{c4_oracle_failure_probability, c4_spec, CodeFamily, CssCodeSpec, MAX_LEVEL};
use crate::error::Error;
use crate::gkp::{find_threshold, hashing_rate_analog, hashing_rate_digital, sigma_to_db};
use crate::montecarlo::{run_plan_with, DecoderChoice, Estimate, Experiment, TrialPlan};
use crate::Decoder;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "GKPAQEC_THREADS";

pub const CSV_HEADER: &str =
    "experiment,decoder,code,level,basis_mode,sigma,squeezing_db,trials,failures,p_fail,ci_low,ci_high,seed";

#[derive(Debug, Parser)]
#[command(
    name = "gkpaqec",
    version,
    about = "GKP-qubit error correction with analog decoding"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo of the three-qubit bit-flip code.
    Bitflip(RunArgs),
    /// Monte Carlo of the concatenated C4/C6 code.
    C4c6 {
        #[command(flatten)]
        run: RunArgs,
        /// Concatenation levels as `first:last`.
        #[arg(long, default_value = "1:3")]
        levels: String,
        /// JSON file replacing the C6 block used above level 1.
        #[arg(long)]
        c6_spec: Option<PathBuf>,
    },
    /// Deterministic quadrature of the failure probability.
    Oracle {
        #[arg(long, value_enum, default_value_t = OracleCode::Bitflip)]
        code: OracleCode,
        #[arg(long, allow_negative_numbers = true)]
        sigma: f64,
        #[arg(long, value_parser = parse_decoder)]
        decoder: Decoder,
        /// Simpson intervals per axis.
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
    /// Root of the hashing rate in sigma.
    Hashing {
        #[arg(long, value_enum)]
        mode: HashingMode,
        #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
        hi: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Single channel sigma.
    #[arg(
        long,
        allow_negative_numbers = true,
        conflicts_with = "sweep",
        required_unless_present = "sweep"
    )]
    sigma: Option<f64>,
    /// Sigma grid `start:end:step`, both ends inclusive when on the grid.
    #[arg(long, allow_hyphen_values = true)]
    sweep: Option<String>,
    /// Trials per cell; defaults depend on the experiment and level.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value = "both", value_parser = parse_decoder_choice)]
    decoder: DecoderChoice,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleCode {
    Bitflip,
    C4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum HashingMode {
    Digital,
    Analog,
}

fn parse_decoder(s: &str) -> Result<Decoder, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_decoder_choice(s: &str) -> Result<DecoderChoice, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
enum CliError {
    Usage { flag: &'static str, message: String },
    Runtime(String),
}

impl CliError {
    fn usage(flag: &'static str, message: impl Into<String>) -> Self {
        CliError::Usage {
            flag,
            message: message.into(),
        }
    }

    fn code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage { flag, message } => write!(f, "invalid value for {flag}: {message}"),
            CliError::Runtime(message) => f.write_str(message),
        }
    }
}

/// Parses `start:end:step` into `start + i·step` for `i = 0, 1, …` up to
/// and including `end` when it lies on the grid.
pub fn parse_sweep(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, end, step] = parts.as_slice() else {
        return Err(format!("expected start:end:step, got '{text}'"));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("'{s}' is not a number"))
    };
    let (start, end, step) = (num(start)?, num(end)?, num(step)?);
    if !(start > 0.0 && start.is_finite() && end.is_finite()) {
        return Err("start must be positive and end finite".into());
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err("step must be positive".into());
    }
    if end < start {
        return Err("end must not be below start".into());
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

/// Parses `first:last` into a validated level range.
pub fn parse_levels(text: &str) -> Result<std::ops::RangeInclusive<u8>, String> {
    let (a, b) = text.split_once(':').unwrap_or((text, text));
    let level = |s: &str| {
        s.trim()
            .parse::<u8>()
            .map_err(|_| format!("'{s}' is not a level"))
    };
    let (a, b) = (level(a)?, level(b)?);
    if a < 1 || b > MAX_LEVEL || a > b {
        return Err(format!(
            "levels must satisfy 1 <= first <= last <= {MAX_LEVEL}"
        ));
    }
    Ok(a..=b)
}

fn worker_count() -> Result<usize, CliError> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(available),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n.min(available)),
            _ => Err(CliError::usage(
                THREADS_ENV,
                format!("'{v}' is not a positive integer"),
            )),
        },
    }
}

/// Float formatting used in every CSV field: 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_row(e: &Estimate) -> String {
    [
        e.experiment.as_str().to_string(),
        e.decoder.to_string(),
        e.code.clone(),
        e.level.to_string(),
        e.basis_mode.to_string(),
        format_float(e.sigma),
        format_float(e.squeezing_db),
        e.trials.to_string(),
        e.failures.to_string(),
        format_float(e.p_fail),
        format_float(e.ci_low),
        format_float(e.ci_high),
        e.seed.to_string(),
    ]
    .join(",")
}

pub fn to_csv(rows: &[Estimate]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let fail = |e: &dyn std::fmt::Display| {
        CliError::Runtime(format!("cannot write {}: {e}", path.display()))
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn sigma_grid(run: &RunArgs) -> Result<Vec<f64>, CliError> {
    match (&run.sigma, &run.sweep) {
        (Some(s), None) => {
            if s.is_finite() && *s > 0.0 {
                Ok(vec![*s])
            } else {
                Err(CliError::usage(
                    "--sigma",
                    format!("{s} is not a positive number"),
                ))
            }
        }
        (None, Some(text)) => parse_sweep(text).map_err(|m| CliError::usage("--sweep", m)),
        _ => Err(CliError::usage(
            "--sigma",
            "give exactly one of --sigma and --sweep",
        )),
    }
}

fn run_experiment(
    experiment: Experiment,
    run: &RunArgs,
    levels: std::ops::RangeInclusive<u8>,
    family: &CodeFamily,
) -> Result<(), CliError> {
    let sigmas = sigma_grid(run)?;
    if run.trials == Some(0) {
        return Err(CliError::usage("--trials", "must be at least 1"));
    }
    let workers = worker_count()?;
    let plan = TrialPlan::new(
        experiment,
        run.decoder,
        sigmas,
        levels,
        run.trials,
        run.seed,
    )
    .map_err(|e| CliError::usage("--sigma", e.to_string()))?;
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for result in run_plan_with(&plan, family, workers) {
        match result {
            Ok(row) => rows.push(row),
            Err(e) => failed.push(e.to_string()),
        }
    }
    let text = match run.format {
        Format::Csv => to_csv(&rows),
        Format::Json => serde_json::to_string_pretty(&rows).expect("estimates serialize") + "\n",
    };
    emit(run.out.as_deref(), &text)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(failed.join("\n")))
    }
}

#[derive(Serialize)]
struct OracleReport {
    sigma: f64,
    decoder: Decoder,
    grid: usize,
    p_fail: f64,
}

#[derive(Serialize)]
struct HashingReport {
    mode: HashingMode,
    sigma_root: f64,
    db_root: f64,
    tolerance: f64,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bitflip(run) => {
            run_experiment(Experiment::Bitflip, &run, 1..=1, &CodeFamily::default())
        }
        Command::C4c6 {
            run,
            levels,
            c6_spec,
        } => {
            let levels = parse_levels(&levels).map_err(|m| CliError::usage("--levels", m))?;
            let family = match c6_spec {
                None => CodeFamily::default(),
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        CliError::usage("--c6-spec", format!("{}: {e}", path.display()))
                    })?;
                    let spec = CssCodeSpec::from_json(&text)
                        .map_err(|e| CliError::usage("--c6-spec", e.to_string()))?;
                    CodeFamily::new(c4_spec(), spec)
                }
            };
            run_experiment(Experiment::C4c6, &run, levels, &family)
        }
        Command::Oracle {
            code,
            sigma,
            decoder,
            grid,
        } => {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(CliError::usage(
                    "--sigma",
                    format!("{sigma} is not a positive number"),
                ));
            }
            let min_grid = match code {
                OracleCode::Bitflip => bitflip::MIN_GRID,
                OracleCode::C4 => crate::c4c6::ORACLE_MIN_GRID,
            };
            if grid < min_grid {
                return Err(CliError::usage(
                    "--grid",
                    format!("must be at least {min_grid}"),
                ));
            }
            let p_fail = match code {
                OracleCode::Bitflip => bitflip::oracle_failure_probability(sigma, decoder, grid),
                OracleCode::C4 => c4_oracle_failure_probability(sigma, decoder, grid),
            }
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            let report = OracleReport {
                sigma,
                decoder,
                grid,
                p_fail,
            };
            emit(
                None,
                &(serde_json::to_string(&report).expect("report serializes") + "\n"),
            )
        }
        Command::Hashing { mode, lo, hi, tol } => {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(CliError::usage("--tol", "must be positive"));
            }
            let root = match mode {
                HashingMode::Digital => find_threshold(hashing_rate_digital, lo, hi, tol),
                HashingMode::Analog => find_threshold(hashing_rate_analog, lo, hi, tol),
            }
            .map_err(|e| CliError::Runtime(e.to_string()))?;
            let report = HashingReport {
                mode,
                sigma_root: root,
                db_root: sigma_to_db(root),
                tolerance: tol,
            };
            emit(
                None,
                &(serde_json::to_string(&report).expect("report serializes") + "\n"),
            )
        }
    }
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("gkpaqec: {e}");
            e.code()
        }
    }
}
