use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use radpair_cli::{check_json, evolve_csv, trajectories_csv, CliError, RunConfig};
use radpair_core::Execution;

#[derive(Debug, Parser)]
#[command(name = "radpair", version, about = "Radical-pair recombination: master equations and quantum-jump ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file; overrides output.path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Monte Carlo seed; overrides mc.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Integrate all models and write the comparison CSV.
    Evolve,
    /// Run the quantum-jump ensemble and write its statistics CSV.
    Trajectories,
    /// Write the JSON consistency summary.
    Check,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let src = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_toml(&src)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }

    let body = match cli.command {
        Command::Evolve => evolve_csv(&cfg)?,
        Command::Trajectories => trajectories_csv(&cfg, Execution::Parallel)?,
        Command::Check => check_json(&cfg, Execution::Parallel)?,
    };
    emit(cfg.output.as_deref(), &body)
}

fn emit(path: Option<&Path>, body: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, body)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => Ok(std::io::stdout().lock().write_all(body.as_bytes())?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("radpair: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
