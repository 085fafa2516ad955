use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use barrierlab::config::{ExperimentConfig, Overrides};
use barrierlab::error::CliError;
use barrierlab::experiments::run_experiment;
use barrierlab::report::{write_report, RunMetadata};
use barrierlab_core::feller::{classify_boundary, RatioSpec};
use barrierlab_core::LabError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "barrierlab", version, about = "Monte Carlo experiments on stochastic control barrier functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (defaults to out/<experiment>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_paths: Option<u64>,
        /// Single step size; replaces any dt sweep.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
    /// Classify the boundary at zero for `μ̃/σ̃² = γ h^{-p}`.
    FellerClassify {
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, action = clap::ArgAction::Set)]
        sigma_bounded: bool,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        c: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, seed, n_paths, dt } => {
            let mut file = ExperimentConfig::load(&config)?;
            file.apply(&Overrides { out, seed, n_paths, dt });
            let resolved = file.resolve()?;
            let started = SystemTime::now();
            let clock = Instant::now();
            let report = run_experiment(&resolved)?;
            let meta = RunMetadata::new(started, clock.elapsed());
            for line in &report.digest {
                println!("{line}");
            }
            write_report(&report, &meta, &resolved.output_dir)?;
            eprintln!("wrote {} ({:.1} s)", resolved.output_dir.display(), meta.elapsed_seconds);
            Ok(())
        }
        Command::Validate { config } => {
            let resolved = ExperimentConfig::load(&config)?.resolve()?;
            println!("{}: ok ({})", config.display(), resolved.experiment);
            Ok(())
        }
        Command::FellerClassify { gamma, p, sigma_bounded, c } => {
            let spec = RatioSpec::new(gamma, p).with_c(c).with_sigma_lower_bounded(sigma_bounded);
            let class = classify_boundary(&spec).map_err(|e| match e {
                LabError::InvalidArgument(msg) => CliError::Config(vec![msg]),
                e => e.into(),
            })?;
            let json = serde_json::to_string_pretty(&class).map_err(|e| CliError::Output(e.to_string()))?;
            println!("{json}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
