mod commands;
mod config;
mod error;
mod item;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Method, Overrides, RunConfig};
use error::CliError;

/// Reprojection-based image stitching toolkit.
#[derive(Debug, Parser)]
#[command(name = "pis3r", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for dataset-level work (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    method: Option<Method>,
    /// Index of the reference view.
    #[arg(long, global = true)]
    reference: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with exact cameras and point maps.
    Synth,
    /// Stitch an item directory or every item of a dataset.
    Stitch { input: PathBuf },
    /// Score stitched outputs against a dataset's ground truth.
    Eval { dataset: PathBuf, stitched: PathBuf },
    /// Assess the parallax level of a view pair.
    Classify { cameras: PathBuf, pmap: PathBuf },
    /// Run the residual-diffusion invariant suite.
    RddmCheck,
}

fn require_out(out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    out.ok_or_else(|| CliError::Invalid("--out is required".into()))
}

fn run(cli: Cli) -> Result<String, CliError> {
    let overrides = Overrides { method: cli.method, reference: cli.reference, seed: cli.seed, jobs: cli.jobs };
    let config = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Synth => {
            let manifest = commands::synth(&config, &require_out(cli.out)?)?;
            Ok(manifest.display().to_string())
        }
        Command::Stitch { input } => commands::stitch_cmd(&config, &input, &require_out(cli.out)?),
        Command::Eval { dataset, stitched } => commands::eval_cmd(&config, &dataset, &stitched, &require_out(cli.out)?),
        Command::Classify { cameras, pmap } => commands::classify_cmd(&config, &cameras, &pmap, cli.out.as_deref()),
        Command::RddmCheck => commands::rddm_check_cmd(cli.seed.unwrap_or(0)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PIS3R_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
