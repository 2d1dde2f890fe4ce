//! Command-line front end: `levyflow run <config.toml>`.

pub mod config;
pub mod run;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::error;

use crate::error::Error;
pub use config::{parse_config, parse_config_at, ConfigError, Job, RunConfig};
pub use run::{compute, execute, format_number, RunError, RunReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "levyflow", version, about = "Perturbative flow of noise-driven potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a configuration and run its job.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Validate and describe the job without computing anything.
        #[arg(long)]
        dry_run: bool,
        #[arg(short, long)]
        verbose: bool,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Quadrature { .. } | Error::UnboundedPotential { .. } => EXIT_NUMERICAL,
        _ => EXIT_INVALID,
    }
}

fn run_config(path: &Path, out: Option<PathBuf>, dry_run: bool) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return EXIT_IO;
        }
    };
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cfg = match parse_config_at(&text, base) {
        Ok(c) => c,
        Err(errors) => {
            eprintln!("error: invalid configuration {}", path.display());
            for e in errors {
                eprintln!("  {e}");
            }
            return EXIT_INVALID;
        }
    };
    if let Some(dir) = out {
        cfg.output.directory = dir;
    }
    if dry_run {
        println!("configuration ok");
        println!("job: {}", cfg.job.name());
        println!("max_order: {}", cfg.numerics.max_order);
        println!("output: {}", cfg.output.directory.display());
        return EXIT_OK;
    }
    match execute(&cfg, &text) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            println!("wall_time_s: {:.3}", report.wall_time.as_secs_f64());
            println!("outputs: {}", report.directory.display());
            EXIT_OK
        }
        Err(RunError::Compute(e)) => {
            error!("{e}");
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Err(e @ RunError::Io { .. }) => {
            eprintln!("error: {e}");
            EXIT_IO
        }
    }
}

/// Runs the command line given by `args` (including the program name) and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run {
            config,
            out,
            dry_run,
            verbose,
        } => {
            let level = if verbose { "debug" } else { "warn" };
            let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
            run_config(&config, out, dry_run)
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
