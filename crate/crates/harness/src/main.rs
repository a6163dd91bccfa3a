use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qdcascade_harness::config::{load_scenario, parse_temperature_list, Kind, Scenario};
use qdcascade_harness::{run_scenario, HarnessError};

#[derive(Parser)]
#[command(name = "qdcascade", version, about = "Biexciton-exciton cascade scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// XX and X decay traces with fitted lifetimes.
    DecaySweep(RunArgs),
    /// Concurrence and Bell fidelity against temperature.
    ConcurrenceSweep(RunArgs),
    /// Two-photon matrices over equidistant delay bins.
    BinSweep(RunArgs),
    /// Synthetic tomography and maximum-likelihood reconstruction.
    TomographyDemo(RunArgs),
    /// Parse and check a configuration file, then print it resolved.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated temperatures, e.g. `4.4,12.4` or `20 K`.
    #[arg(long)]
    temps: Option<String>,
}

fn resolve(kind: Kind, args: &RunArgs) -> Result<Scenario, HarnessError> {
    let mut sc = match &args.config {
        Some(path) => load_scenario(path, Some(kind))?,
        None => Scenario::defaults(kind),
    };
    if let Some(out) = &args.out {
        sc.out = out.clone();
    }
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    if let Some(t) = &args.temps {
        sc.temperatures = parse_temperature_list(t)?;
    }
    sc.validate()?;
    Ok(sc)
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    let (kind, args) = match cmd {
        Command::DecaySweep(a) => (Kind::DecaySweep, a),
        Command::ConcurrenceSweep(a) => (Kind::ConcurrenceSweep, a),
        Command::BinSweep(a) => (Kind::BinSweep, a),
        Command::TomographyDemo(a) => (Kind::TomographyDemo, a),
        Command::ValidateConfig { config } => {
            let sc = load_scenario(&config, None)?;
            let json = serde_json::to_string_pretty(&sc).map_err(|e| HarnessError::Config(e.to_string()))?;
            let _ = writeln!(std::io::stdout().lock(), "{json}");
            return Ok(());
        }
    };
    let sc = resolve(kind, &args)?;
    let manifest = run_scenario(&sc)?;
    let _ = writeln!(std::io::stdout().lock(), "{}: {} files in {}", manifest.kind, manifest.files.len(), sc.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
