mod commands;
mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

/// Simulation and verification driver for cubic SPDEs with alpha-stable
/// noise and their amplitude-equation reductions.
#[derive(Parser)]
#[command(name = "levyamp", version)]
struct Cli {
    /// TOML configuration file; flags override individual fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $LEVYAMP_OUT_DIR or ./levyamp-out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for path-parallel runs (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo ensemble of the reduced amplitude equation.
    SimulateAmplitude {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Full SPDE trajectories at a fixed epsilon.
    SimulateSpde {
        #[arg(long)]
        epsilon: f64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Residual-scaling sweep over the configured epsilon list.
    Sweep {
        /// Reuse per-epsilon cell files already present in the output dir.
        #[arg(long)]
        resume: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the oracle suite (quadrature, semigroup, sampler law) and
    /// validate the configuration.
    Validate {
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Preset: decaying ensembles at gamma = -0.05 for alphas 1.9/1.5/1.1.
    ReproduceFig2 {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Preset: pitchfork ensembles at gamma = 0.4 for alphas 1.8/1.2.
    ReproduceFig3 {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
    },
}

fn effective_config(cli_config: &Option<PathBuf>, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match cli_config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut config);
    Ok(config)
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()?;
    }
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| std::env::var_os("LEVYAMP_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("levyamp-out"));
    std::fs::create_dir_all(&out_dir)?;

    match &cli.command {
        Command::SimulateAmplitude { overrides } => {
            let config = effective_config(&cli.config, overrides)?;
            commands::cmd_simulate_amplitude(&config, &out_dir)
        }
        Command::SimulateSpde { epsilon, overrides } => {
            let config = effective_config(&cli.config, overrides)?;
            commands::cmd_simulate_spde(&config, *epsilon, &out_dir)
        }
        Command::Sweep { resume, overrides } => {
            let config = effective_config(&cli.config, overrides)?;
            commands::cmd_sweep(&config, *resume, &out_dir)
        }
        Command::Validate { json, overrides } => {
            let config = effective_config(&cli.config, overrides)?;
            commands::cmd_validate(&config, *json, &out_dir)
        }
        Command::ReproduceFig2 { seed, paths } => {
            commands::cmd_reproduce_fig2(*seed, *paths, &out_dir)
        }
        Command::ReproduceFig3 { seed, paths } => {
            commands::cmd_reproduce_fig3(*seed, *paths, &out_dir)
        }
    }
}
