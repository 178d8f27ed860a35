use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod manifest;

use commands::Outcome;

#[derive(Parser)]
#[command(name = "tvblf", version, about = "Constrained adaptive control: feasibility checks, envelope design, simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a config (or every *.json in a directory) and write trajectory, summary and manifest.
    Simulate(SimulateArgs),
    /// Evaluate the offline feasibility certificate of a config.
    Check(CheckArgs),
    /// Tabulate a prescribed-performance envelope and its convergence time.
    Envelope(EnvelopeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Run even if the feasibility certificate fails.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Integration steps per control step.
    #[arg(long)]
    pub substeps: Option<usize>,
    /// Parallel jobs when CONFIG is a directory.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Directory for the margin series CSV files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct EnvelopeArgs {
    #[arg(long)]
    pub phi0: f64,
    #[arg(long = "phiInf", alias = "phi-inf")]
    pub phi_inf: f64,
    #[arg(long)]
    pub kappa: f64,
    #[arg(long)]
    pub nu: f64,
    #[arg(long)]
    pub eps: f64,
    /// Table end time; defaults to twice the convergence time.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 21)]
    pub points: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TVBLF_LOG", "warn")).init();
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let outcome = match cli.command {
        Command::Simulate(a) => commands::simulate(&a, &argv),
        Command::Check(a) => commands::check(&a),
        Command::Envelope(a) => commands::envelope(&a),
    };
    match outcome {
        Ok(o) => ExitCode::from(o.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Outcome::Error.code())
        }
    }
}
