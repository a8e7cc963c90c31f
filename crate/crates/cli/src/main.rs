use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use config::{read_json, ConfigFile};
use error::CliError;
use output::{OutDir, RunManifest};

/// Error exponents, exponent minimization and natural type selection for
/// discrete memoryless channels.
#[derive(Parser)]
#[command(name = "nts", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the error and correct-decoding exponents over a rate grid.
    Curves(RunArgs),
    /// Run the fixed-rate input iteration.
    IterateRate(RunArgs),
    /// Run the fixed-slope input iteration.
    IterateSlope(RunArgs),
    /// Compare the closed forms with the implicit type-domain exponents.
    Oracle(RunArgs),
    /// Exact finite-length probabilities of the random-coding ensemble.
    Exact(RunArgs),
    /// Simulate natural type selection over a sequence of blocks.
    Simulate(RunArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn dispatch(command: &str, cfg: ConfigFile, out: &Path) -> Result<(), CliError> {
    let run = match command {
        "curves" => commands::curves,
        "iterate-rate" => commands::iterate_rate,
        "iterate-slope" => commands::iterate_slope,
        "oracle" => commands::oracle,
        "exact" => commands::exact,
        "simulate" => commands::simulate,
        other => return Err(CliError::Config(format!("field `command`: unknown command `{other}`"))),
    };
    let mut dir = OutDir::create(out)?;
    let resolved = run(cfg, &mut dir)?;
    dir.finish(command, resolved)
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("NTS_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("NTS_THREADS: `{raw}` is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Numeric(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let (name, args) = match cli.command {
        Command::Replay(a) => {
            let m: RunManifest = read_json(&a.manifest)?;
            log::info!("replaying `{}` from {}", m.command, a.manifest.display());
            return dispatch(&m.command, m.config, &a.out);
        }
        Command::Curves(a) => ("curves", a),
        Command::IterateRate(a) => ("iterate-rate", a),
        Command::IterateSlope(a) => ("iterate-slope", a),
        Command::Oracle(a) => ("oracle", a),
        Command::Exact(a) => ("exact", a),
        Command::Simulate(a) => ("simulate", a),
    };
    let cfg: ConfigFile = read_json(&args.config)?;
    dispatch(name, cfg, &args.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(CliError::Usage(String::new()).exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nts: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
