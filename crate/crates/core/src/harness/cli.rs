//! Command-line front end. [`run`] maps outcomes to exit codes: 0 when
//! every declared threshold passes, 1 on a threshold failure, 2 on a usage
//! or configuration error, 3 on a resource or I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::{generate, read_report, render, run_experiment, verify_hashes, ExperimentConfig, ExperimentKind};
use crate::error::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "TPI_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "tpi",
    version,
    about = "Tensor power iteration experiments",
    after_help = "Exit codes: 0 all thresholds pass, 1 a threshold fails, 2 usage or config error, 3 resource or I/O error.\n\
                  The worker count defaults to $TPI_THREADS when --threads is absent."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed; overrides `seeds.base` in the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory; overrides `output` in the config. For `report`, the run directory to read.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: $TPI_THREADS, else one per core).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Format of the summary printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the ground-truth tensor, factor and samples for the config's base seed.
    Generate,
    /// Run a recovery or sample-complexity experiment.
    Decompose,
    /// Run a dynamics or noise-sweep experiment.
    Dynamics,
    /// Run a probe experiment.
    Probe,
    /// Re-render the tables of a stored run after checking its config hashes.
    Report,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Resource(_) | Error::Csv(_) => EXIT_RESOURCE,
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

/// Runs the CLI on `argv` (including the program name), writing the summary
/// to stdout and diagnostics to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{}", e.render());
                    return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_USAGE
                    } else {
                        EXIT_PASS
                    };
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "tpi: {}", f.message);
            f.code
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if let Some(n) = flag {
        return if n == 0 { Err(Failure::usage("--threads must be at least 1")) } else { Ok(Some(n)) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::usage(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::usage("this command needs --config <PATH>"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))?;
    if let Some(seed) = cli.seed {
        cfg.seeds.base = seed;
    }
    cfg.validate().map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))?;
    Ok(cfg)
}

fn output_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("tpi-runs").join(format!("{}-{}", cfg.kind.name(), &cfg.hash()[..12])))
}

fn with_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, Failure> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure { code: EXIT_RESOURCE, message: format!("cannot start {n} threads: {e}") })?;
            Ok(pool.install(f))
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let threads = thread_count(cli.threads)?;
    let json = cli.format == Format::Json;
    let io = |e: std::io::Error| Failure::from(Error::Io(e));
    match cli.command {
        Command::Report => {
            let dir = cli.out.as_deref().ok_or_else(|| Failure::usage("report needs --out <DIR> pointing at a run"))?;
            report(cli, dir, json, out)
        }
        Command::Generate => {
            let cfg = load_config(cli)?;
            let dir = output_dir(cli, &cfg);
            let written = with_pool(threads, || generate(&cfg, &dir))??;
            for p in written {
                writeln!(out, "{}", p.display()).map_err(io)?;
            }
            Ok(EXIT_PASS)
        }
        Command::Decompose | Command::Dynamics | Command::Probe => {
            let cfg = load_config(cli)?;
            let allowed: &[ExperimentKind] = match cli.command {
                Command::Decompose => &[ExperimentKind::Recovery, ExperimentKind::SampleComplexity],
                Command::Dynamics => &[ExperimentKind::Dynamics, ExperimentKind::NoiseSweep],
                _ => &[ExperimentKind::Probe],
            };
            if !allowed.contains(&cfg.kind) {
                let names: Vec<&str> = allowed.iter().map(|k| k.name()).collect();
                return Err(Failure::usage(format!(
                    "config kind `{}` does not match this command (expected {})",
                    cfg.kind.name(),
                    names.join(" or ")
                )));
            }
            let dir = output_dir(cli, &cfg);
            let run = with_pool(threads, || run_experiment(&cfg))??;
            run.write(&dir)?;
            write!(out, "{}", render(&run.report, json)?).map_err(io)?;
            if run.report.budget_exceeded {
                return Err(Failure {
                    code: EXIT_RESOURCE,
                    message: format!("time budget exhausted; partial results in {}", dir.display()),
                });
            }
            Ok(if run.report.passed { EXIT_PASS } else { EXIT_FAIL })
        }
    }
}

fn report(cli: &Cli, dir: &Path, json: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    let stored = read_report(dir).map_err(|e| match e {
        Error::Io(e) => Failure::usage(format!("cannot read run in {}: {e}", dir.display())),
        other => Failure::from(other),
    })?;
    if cli.config.is_some() {
        let cfg = load_config(cli)?;
        if cfg.hash() != stored.config_hash {
            return Err(Failure::usage(format!(
                "config hash {} does not match the stored run's {}",
                cfg.hash(),
                stored.config_hash
            )));
        }
    }
    verify_hashes(dir, &stored.config_hash).map_err(|e| match e {
        Error::Precondition(m) => Failure::usage(format!("refusing mismatched outputs: {m}")),
        other => Failure::from(other),
    })?;
    write!(out, "{}", render(&stored, json)?).map_err(|e| Failure::from(Error::Io(e)))?;
    Ok(if stored.passed { EXIT_PASS } else { EXIT_FAIL })
}
