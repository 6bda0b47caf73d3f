use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use observer_cli::{
    cmd_check_geometry, cmd_gain, cmd_lemmas, cmd_simulate, geometry_params_from_file, CliError,
    GeometryParams, LemmaParams, RunManifest, EXIT_DIVERGED,
};

/// Distributed-observer toolkit: simulate leader-follower scenarios,
/// sample the spectral product bounds, check observable-form geometry, and
/// design observer gains.
#[derive(Parser)]
#[command(name = "observer-cli", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario JSON; writes trajectory.csv, metrics.txt, plot.gp
    Simulate {
        /// Scenario config file (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo trials of the spectral product bounds; writes scatter
    /// CSVs and a violation summary
    Lemmas {
        /// Number of random trials
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Matrix dimension
        #[arg(long, default_value_t = 5)]
        dim: usize,
        /// Lyapunov level: solves with right-hand side -mu I
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        /// Master seed for the trial stream
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker-thread cap (default: up to 8); results are identical
        /// either way
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory, created if missing
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the observable-form conditions for a bundled leader model;
    /// writes report.txt
    CheckGeometry {
        /// Model name: vdp, esslm, or example1
        #[arg(long, required_unless_present = "config", conflicts_with = "config")]
        model: Option<String>,
        /// JSON request instead of --model; may also set tauScale,
        /// samples, tol, seed
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sample count (default: a per-model budget)
        #[arg(long)]
        samples: Option<usize>,
        /// Condition tolerance
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Seed for the sample draw
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory, created if missing
        #[arg(long)]
        out: PathBuf,
    },
    /// Design and certify an observer gain from a JSON request; writes
    /// gain.txt and prints it
    Gain {
        /// Design request file (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<RunManifest, CliError> {
    match cli.command {
        Command::Simulate { config, out } => cmd_simulate(&config, &out),
        Command::Lemmas {
            trials,
            dim,
            mu,
            seed,
            jobs,
            out,
        } => cmd_lemmas(
            &LemmaParams {
                trials,
                dim,
                mu,
                seed,
                jobs,
            },
            &out,
        ),
        Command::CheckGeometry {
            model,
            config,
            samples,
            tol,
            seed,
            out,
        } => {
            let params = match (model, config) {
                (Some(model), None) => GeometryParams {
                    model,
                    tau_scale: 1.0,
                    samples,
                    tol,
                    seed,
                },
                (_, Some(path)) => geometry_params_from_file(&path, samples, tol, seed)?,
                (None, None) => {
                    return Err(CliError::Config(
                        "pass either --model or --config".into(),
                    ))
                }
            };
            cmd_check_geometry(&params, &out)
        }
        Command::Gain { config, out } => cmd_gain(&config, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(manifest) => {
            if manifest.diverged {
                eprintln!(
                    "run diverged at t={:.3}: {}",
                    manifest.divergence_time.unwrap_or(f64::NAN),
                    manifest.divergence_reason.as_deref().unwrap_or("unknown"),
                );
                return ExitCode::from(EXIT_DIVERGED as u8);
            }
            println!(
                "wrote {} files to {}",
                manifest.files.len(),
                manifest.out_dir
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
