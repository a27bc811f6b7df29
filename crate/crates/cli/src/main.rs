mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Simulate, reconstruct and analyse phase-sensitive states stored in a
/// cavity memory.
#[derive(Parser)]
#[command(name = "cvmem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML, dotted keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `output_dir` from the config, else ./cvmem-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fock truncation: simulation dimension for `simulate` and `pipeline`,
    /// reconstruction dimension for `tomo`, truncation of the input state
    /// elsewhere.
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Prepare, store and sample quadratures for every storage time.
    Simulate(Common),
    /// Maximum-likelihood reconstruction from a samples file.
    Tomo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: PathBuf,
    },
    /// Wigner grid and its minimum for a density matrix.
    Wigner {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        state: PathBuf,
    },
    /// Gaussian-corrected non-Gaussianity witness curve.
    Witness {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        state: PathBuf,
    },
    /// Loss and phase-noise estimate from the 0/1 block.
    Decompose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        state: PathBuf,
        #[arg(long, requires = "beta")]
        alpha: Option<f64>,
        #[arg(long, requires = "alpha")]
        beta: Option<f64>,
    },
    /// Simulate, reconstruct and analyse every storage time.
    Pipeline(Common),
    /// Temporal mode of a block of raw homodyne traces.
    TemporalMode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        traces: PathBuf,
    },
}

fn load(common: &Common) -> CliResult<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => config::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(common) => {
            let mut config = load(&common)?;
            if let Some(d) = common.dim {
                config.dim = d;
            }
            let out = commands::default_out(&config, common.out);
            commands::simulate(&config, &out)
        }
        Command::Pipeline(common) => {
            let mut config = load(&common)?;
            if let Some(d) = common.dim {
                config.dim = d;
            }
            let out = commands::default_out(&config, common.out);
            commands::pipeline(&config, &out)
        }
        Command::Tomo { common, samples } => {
            let mut config = load(&common)?;
            if let Some(d) = common.dim {
                config.tomography.dim = d;
            }
            config.validate()?;
            let out = commands::default_out(&config, common.out);
            commands::tomo(&samples, &config.mle_options()?, &out)
        }
        Command::Wigner { common, state } => {
            let config = load(&common)?;
            config.validate()?;
            let rho = commands::read_state("--state", &state, common.dim)?;
            commands::wigner(&rho, &config, &commands::default_out(&config, common.out))
        }
        Command::Witness { common, state } => {
            let config = load(&common)?;
            config.validate()?;
            let rho = commands::read_state("--state", &state, common.dim)?;
            commands::witness(&rho, &config, &commands::default_out(&config, common.out))
        }
        Command::Decompose {
            common,
            state,
            alpha,
            beta,
        } => {
            let config = load(&common)?;
            config.validate()?;
            let rho = commands::read_state("--state", &state, common.dim)?;
            let (a, b) = match (alpha, beta, config.analysis.alpha, config.analysis.beta) {
                (Some(a), Some(b), _, _) | (None, None, Some(a), Some(b)) => (a, b),
                _ => (config.preparation.alpha, config.preparation.beta),
            };
            commands::decompose(&rho, a, b, &commands::default_out(&config, common.out))
        }
        Command::TemporalMode { common, traces } => {
            let config = load(&common)?;
            commands::temporal_mode(&traces, &commands::default_out(&config, common.out))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Numeric { source, .. } = &e {
                log::debug!("{source:?}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
