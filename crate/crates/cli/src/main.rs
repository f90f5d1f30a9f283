//! `acoustend`: simulate, characterise, generate, analyse and classify
//! acoustic tendon-load experiments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use acoustend::io::Config;
use acoustend::Error;
use clap::{Parser, Subcommand};

const EXIT_USAGE: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "acoustend", version, about)]
struct Cli {
    /// JSON configuration; missing blocks and fields take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (default: ACOUSTEND_THREADS, else all cores).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the phantom unloaded and at one tendon force; writes receiver
    /// transfers, the geometry/stiffness decomposition and a field map.
    Simulate {
        /// Tendon force, N.
        #[arg(long, default_value_t = 60.0)]
        force: f64,
    },
    /// Transducer frequency response (20-70 kHz) and directivity at 1.5
    /// and 7 cm.
    Characterize,
    /// Generate a synthetic tensile-test dataset.
    Synth {
        /// Disable measurement noise regardless of the configuration.
        #[arg(long)]
        noise_free: bool,
    },
    /// Spectral maps, intensity tables and features of a dataset.
    Analyze {
        /// Dataset directory written by `synth`.
        #[arg(long, value_name = "DIR")]
        dataset: PathBuf,
        /// Specimen whose spectral maps to draw, or `all`
        /// (default: the first specimen).
        #[arg(long)]
        specimen: Option<String>,
        /// Cycle whose loading half builds the spectral maps.
        #[arg(long, default_value_t = 0)]
        cycle: usize,
    },
    /// Damage classification: cross-validation, or prediction with a
    /// saved model.
    Classify {
        #[arg(long, value_name = "DIR")]
        dataset: PathBuf,
        /// Model JSON from an earlier run; without it the tool runs
        /// leave-one-specimen-out validation and saves a model.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
    },
    /// Cohort statistics, correlations and classification summary.
    Report {
        #[arg(long, value_name = "DIR")]
        dataset: PathBuf,
    },
}

fn load_config(cli: &Cli) -> acoustend::Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.synth.seed = seed;
    }
    Ok(config)
}

fn run(cli: &Cli) -> acoustend::Result<()> {
    let config = load_config(cli)?;
    std::fs::create_dir_all(&cli.out)?;
    let threads = cli.threads.map(usize::from);
    acoustend::synthlab::with_threads(threads, || match &cli.command {
        Command::Simulate { force } => commands::simulate(&config, &cli.out, *force),
        Command::Characterize => commands::characterize(&config, &cli.out),
        Command::Synth { noise_free } => commands::synth(&config, &cli.out, *noise_free),
        Command::Analyze {
            dataset,
            specimen,
            cycle,
        } => commands::analyze(&config, &cli.out, dataset, specimen.as_deref(), *cycle),
        Command::Classify { dataset, model } => {
            commands::classify(&config, &cli.out, dataset, model.as_deref())
        }
        Command::Report { dataset } => commands::report(&config, &cli.out, dataset),
    })?
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
