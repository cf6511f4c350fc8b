use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gkw_cli::config::{self, Mode};
use gkw_cli::error::{CliError, EXIT_CONFIG};
use gkw_cli::presets;
use gkw_cli::run::{self, RunOptions};

/// Solver and verification workbench for generalized Kazdan-Warner
/// equations on flat foliated tori.
#[derive(Parser, Debug)]
#[command(name = "gkw", version)]
struct Cli {
    /// Output directory (default: the config's "output", else gkw-out)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for a random initial guess (zero initial guess otherwise)
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Omit timestamps and timings so identical runs give identical reports
    #[arg(long, global = true)]
    reproducible: bool,
    /// Run the minimizer even on Outside or near-boundary data
    #[arg(long, global = true)]
    audit: bool,
    /// Reject data that is not basic for the configured foliation
    #[arg(long, global = true)]
    strict_basic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate the data and decide cone membership
    Check { config: PathBuf },
    /// Solve, or certify that no solution exists
    Solve { config: PathBuf },
    /// Compare full-grid and leaf-space solves
    Harness { config: PathBuf },
    /// Check a stored field against the configured problem
    Verify { config: PathBuf, field: PathBuf },
    /// Print a ready-to-run config; params are key=value pairs
    MakeExample {
        preset: String,
        params: Vec<String>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GKW_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("GKW_THREADS={raw} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))
}

fn load_config(path: &PathBuf) -> Result<config::RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    config::parse_config(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("gkw: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let (mode, path, field) = match cli.command {
        Command::MakeExample { preset, params } => {
            return match presets::make_example(&preset, &params) {
                Ok(cfg) => {
                    println!("{}", cfg.to_json());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("gkw: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            };
        }
        Command::Check { config } => (Mode::Check, config, None),
        Command::Solve { config } => (Mode::Solve, config, None),
        Command::Harness { config } => (Mode::Harness, config, None),
        Command::Verify { config, field } => (Mode::Verify, config, Some(field)),
    };
    let cfg = match load_config(&path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("gkw: {e}");
            let out = cli.out.unwrap_or_else(|| PathBuf::from(run::DEFAULT_OUTPUT));
            let code = run::write_error_report(&out, mode, &e, cli.reproducible);
            return ExitCode::from(code as u8);
        }
    };
    let opts = RunOptions {
        mode,
        out: cli.out,
        seed: cli.seed,
        reproducible: cli.reproducible,
        audit: cli.audit,
        strict_basic: cli.strict_basic,
        field,
    };
    let result = run::run(&cfg, &opts);
    let report = &result.report;
    match &report.error {
        Some(e) => eprintln!("gkw: {}", e.message),
        None => println!(
            "{}: {} (report in {})",
            format!("{mode:?}").to_lowercase(),
            report.status,
            result.out_dir.join("report.json").display()
        ),
    }
    ExitCode::from(result.exit_code as u8)
}
