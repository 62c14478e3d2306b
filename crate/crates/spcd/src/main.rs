use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spcd::commands::{self, exit};
use spcd::config::SEED_ENV;
use spcd::{Overrides, Result, RunConfig, SpcdError};

/// Simulate sequential parallel comparison design trials and tabulate
/// estimator bias and placebo-response misclassification.
///
/// Seed precedence: --seed, then the SPCD_SEED environment variable, then
/// `seed` in the config file.
#[derive(Debug, Parser)]
#[command(name = "spcd", version)]
struct Cli {
    /// TOML run configuration; defaults are used for anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for grid runs (0 = one per core).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Replicates per grid cell.
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One trial as a participant-level CSV.
    Simulate,
    /// Monte Carlo bias and NPV summaries over the grid.
    Grid,
    /// Closed-form misclassification and expectations over the grid.
    Analytic,
    /// Fit the two-component change-score mixture to a CSV column.
    Emfit {
        input: PathBuf,
        /// Column to fit (default: `emfit.column` from the config).
        #[arg(long)]
        column: Option<String>,
    },
    /// Compare grid Monte Carlo means with the closed forms.
    Check,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        parallelism: cli.parallelism,
        reps: cli.reps,
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    config.apply(&overrides, env_seed.as_deref())?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<u8> {
    let config = load(cli)?;
    let mut out: Box<dyn Write> = match &config.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let code = match &cli.command {
        Command::Simulate => {
            commands::simulate(&config, &mut out)?;
            exit::OK
        }
        Command::Grid => {
            let cells = commands::grid(&config, &mut out)?;
            for c in cells.iter().filter(|c| c.flagged()) {
                eprintln!(
                    "warning: delta_placebo={} sigma_eps={} classifier={}: {} of {} replicates skipped",
                    c.delta_placebo,
                    c.sigma_eps,
                    c.classifier.name(),
                    c.skipped,
                    c.n_reps
                );
            }
            exit::OK
        }
        Command::Analytic => {
            commands::analytic(&config, &mut out)?;
            exit::OK
        }
        Command::Emfit { input, column } => {
            let file = File::open(input)?;
            commands::emfit(
                &config,
                io::BufReader::new(file),
                column.as_deref(),
                &mut out,
            )?
            .status
            .exit_code()
        }
        Command::Check => {
            if commands::check(&config, &mut out)? == 0 {
                exit::OK
            } else {
                exit::CHECK_FAILED
            }
        }
    };
    out.flush()?;
    Ok(code)
}

fn is_broken_pipe(e: &SpcdError) -> bool {
    let io = match e {
        SpcdError::Io(e) => e,
        SpcdError::Csv(e) => match e.kind() {
            csv::ErrorKind::Io(e) => e,
            _ => return false,
        },
        _ => return false,
    };
    io.kind() == io::ErrorKind::BrokenPipe
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        // Downstream closed the pipe (e.g. `| head`); not our failure.
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(SpcdError::exit_code(&e))
        }
    }
}
