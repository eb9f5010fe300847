//! Experiment CLI for Reward Machines under noisy and hidden symbol
//! grounding.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rmu::harness::{
    emit_results, parse_config, render_results, run_belief_diagnostic, run_experiment, run_sweep,
    solve_report, ExperimentConfig, HarnessError, OutputFormat, DIAGNOSTIC_HEADER, SWEEP_HEADER,
};
use rmu::rm::{parse_rm, validate_rm};

#[derive(Parser)]
#[command(name = "rmu", about = "Reward Machines with uncertain symbol grounding", version)]
struct Cli {
    /// Override the master seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output path from the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Worker-pool size (defaults to the number of CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every (tracker, seed) cell at the configured ε.
    Run { config: PathBuf },
    /// Train and evaluate every (tracker, ε, seed) cell over the ε grid.
    Sweep { config: PathBuf },
    /// Compare tracker beliefs to the exact filter under random policies.
    Diagnose { config: PathBuf },
    /// Parse a Reward Machine file and report diagnostics.
    ValidateRm { file: PathBuf },
    /// Print value-iteration oracles for the configured environment.
    Solve { config: PathBuf },
}

fn load_config(cli: &Cli, path: &PathBuf) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(format) = &cli.format {
        cfg.format = OutputFormat::parse(format)?;
    }
    Ok(cfg)
}

fn deliver<T: serde::Serialize>(
    rows: &[T],
    header: &[&str],
    cfg: &ExperimentConfig,
) -> Result<(), HarnessError> {
    match &cfg.out {
        Some(path) => {
            emit_results(rows, header, path, cfg.format)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => print!("{}", render_results(rows, header, cfg.format)?),
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), HarnessError> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_config(cli, config)?;
            let rows = run_experiment(&cfg)?;
            deliver(&rows, &SWEEP_HEADER, &cfg)
        }
        Command::Sweep { config } => {
            let cfg = load_config(cli, config)?;
            let rows = run_sweep(&cfg)?;
            deliver(&rows, &SWEEP_HEADER, &cfg)
        }
        Command::Diagnose { config } => {
            let cfg = load_config(cli, config)?;
            let rows = run_belief_diagnostic(&cfg)?;
            deliver(&rows, &DIAGNOSTIC_HEADER, &cfg)
        }
        Command::ValidateRm { file } => {
            let text = std::fs::read_to_string(file)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", file.display())))?;
            let rm = parse_rm(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
            let diagnostics = validate_rm(&rm);
            println!(
                "{}: {} states, {} terminals, {} edges",
                file.display(),
                rm.n_states(),
                rm.n_terminals(),
                rm.edge_count()
            );
            if diagnostics.is_empty() {
                println!("no diagnostics");
            }
            for d in diagnostics {
                println!("{d}");
            }
            Ok(())
        }
        Command::Solve { config } => {
            let cfg = load_config(cli, config)?;
            print!("{}", solve_report(&cfg)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
