mod bundle;
mod check;
mod config;
mod error;
mod forcing;
mod info;
mod plot;
mod solve;
mod study;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::bundle::Bundle;
use crate::check::{Suite, SUITES};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "nlstokes", version, about = "Meshfree nonlocal Stokes solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the results of a previous run in the output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance.
    Solve(Common),
    /// Run a convergence study down a ladder of horizons.
    Study(Common),
    /// Run invariant check suites.
    Check {
        #[command(flatten)]
        common: Common,
        /// Suite to run; repeat for several. Default: all.
        #[arg(long)]
        suite: Vec<String>,
    },
    /// List domains, profiles, cases, methods and defaults.
    Info {
        /// Accepted for uniformity; not read.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn set_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("NLSTOKES_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("NLSTOKES_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn with_bundle(common: &Common, name: &str, body: impl FnOnce(&config::Resolved, &mut Bundle) -> Result<(), CliError>) -> Result<(), CliError> {
    let cfg = config::load(&common.config)?;
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| CliError::Config("`output`: no output directory (set it in the config or pass --out)".into()))?;
    let mut bundle = Bundle::open(&dir, name, common.force)?;
    let result = body(&cfg, &mut bundle);
    // Whatever was written, including partial results, goes in the manifest.
    let files = bundle.finish()?;
    if result.is_ok() {
        println!("wrote {files} files to {}", dir.display());
    }
    result
}

fn run(cli: Cli) -> Result<(), CliError> {
    set_threads()?;
    match cli.command {
        Command::Solve(c) => with_bundle(&c, "solve", solve::run),
        Command::Study(c) => with_bundle(&c, "study", study::run),
        Command::Check { common, suite } => {
            let suites: Vec<Suite> = if suite.is_empty() {
                SUITES.to_vec()
            } else {
                suite.iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(CliError::Config)?
            };
            with_bundle(&common, "check", |cfg, b| check::run(cfg, &suites, b))
        }
        Command::Info { .. } => {
            print!("{}", info::text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nlstokes: {e}");
            e.exit_code()
        }
    }
}
