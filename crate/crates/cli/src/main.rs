mod artifact;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use artifact::OutDir;
use config::ExperimentConfig;

/// Invalid or missing configuration; exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Parser)]
#[command(
    name = "cdjp",
    version,
    about = "Most-likely paths and optimal control for a monitored oscillator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in experiment: binomial, cat-cooling, cat-to-cat or gauss-theta0.
    #[arg(long, global = true, value_name = "NAME", conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory; defaults to `out/<name>`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    n_traj: Option<usize>,
    #[arg(long, global = true, value_name = "K", env = "CDJP_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one most-likely path.
    Mlp,
    /// Anneal the initial readout state for the optimal control.
    Optimize,
    /// Anneal a Fourier sample control.
    SampleControl,
    /// Simulate a batch of trajectories under a stored solution.
    Trajectories {
        /// Solution file; defaults to the optimal solution in the output directory.
        #[arg(long, value_name = "PATH")]
        solution: Option<PathBuf>,
    },
    /// Gaussian position-measurement benchmark against the closed form.
    GaussBench,
    /// Compare the optimal and sample batch histograms.
    Compare,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => {
            return Err(ConfigError(
                "one of --config or --preset is required".into(),
            ))
        }
    };
    if let Some(s) = cli.seed {
        cfg.reseed(s);
    }
    if let Some(n) = cli.n_traj {
        cfg.batch.n_traj = n;
    }
    cfg.resolve()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli)?;
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(ConfigError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()?;
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let out = OutDir::create(dir, cfg.hash(), cfg.seed)?;
    match &cli.command {
        Command::Mlp => commands::mlp(&cfg, &out),
        Command::Optimize => commands::optimize(&cfg, &out),
        Command::SampleControl => commands::sample_control(&cfg, &out),
        Command::Trajectories { solution } => {
            commands::trajectories(&cfg, &out, solution.as_deref())
        }
        Command::GaussBench => commands::gauss_bench(&cfg, &out),
        Command::Compare => commands::compare_batches(&cfg, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
