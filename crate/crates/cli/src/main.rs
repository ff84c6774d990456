//! `phcf` — stochastic car-following on a ring road: simulation sweeps,
//! linear stability grids, stationary-covariance reports, and speed
//! autocorrelation curves.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phcf_cli::config::{parse_config, ScenarioConfig};
use phcf_cli::runners;

#[derive(Parser)]
#[command(name = "phcf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario config file (flat `key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Master seed override; replication r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker-pool size; defaults to machine parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo simulation sweep over alpha; NDJSON summary plus
    /// optional trajectory CSVs.
    Simulate(CommonArgs),
    /// Linear stability grid: margin, spectral bound, and the exact
    /// per-mode test for every parameter combination.
    Stability(CommonArgs),
    /// Stationary covariance versus a simulated ensemble.
    Invariant(CommonArgs),
    /// Speed autocorrelation curves per alpha.
    Acf(CommonArgs),
}

fn load(args: &CommonArgs) -> Result<(ScenarioConfig, PathBuf), String> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read `{}`: {e}", args.config.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| format!("cannot size worker pool: {e}"))?;
    }
    Ok((cfg, out))
}

fn run(command: &Command) -> Result<ExitCode, String> {
    match command {
        Command::Simulate(args) => {
            let (cfg, out) = load(args)?;
            let outcome = runners::run_simulate(&cfg, &out).map_err(|e| e.to_string())?;
            println!("summary: {}", outcome.summary_path.display());
            if outcome.failed_replications > 0 {
                eprintln!("{} replication(s) failed", outcome.failed_replications);
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Stability(args) => {
            let (cfg, out) = load(args)?;
            let path = runners::run_stability(&cfg, &out).map_err(|e| e.to_string())?;
            println!("stability grid: {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Invariant(args) => {
            let (cfg, out) = load(args)?;
            let report = runners::run_invariant(&cfg, &out).map_err(|e| e.to_string())?;
            println!(
                "abar = {:.6}, relative gap = {:.4}, W2 = {:.6} ({})",
                report.abar,
                report.relative_frobenius_gap,
                report.gaussian_w2,
                out.display(),
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Acf(args) => {
            let (cfg, out) = load(args)?;
            let path = runners::run_acf(&cfg, &out).map_err(|e| e.to_string())?;
            println!("acf curves: {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
