use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use relaysim_cli::commands;
use relaysim_cli::config::load_config;
use relaysim_cli::CliError;

/// Link-level simulator and analytic toolkit for contention-based relay
/// selection with hybrid-ARQ.
#[derive(Parser)]
#[command(name = "relaysim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form throughput approximation for the config.
    Approx {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run Monte Carlo trials or sweeps and emit CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the experiment seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Output path; `-` writes CSV to stdout.
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Grid-search a free parameter of the throughput approximation.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// `contention` or `switchpoint`.
        #[arg(long)]
        target: String,
        /// Grid step: probability for contention, dB for switchpoint.
        #[arg(long)]
        grid_step: Option<f64>,
    },
    /// Recompute the per-slot signaling overhead arithmetic.
    Overhead {
        #[arg(long)]
        config: PathBuf,
    },
    /// Exact enumeration of relay selection probabilities.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    match cli.command {
        Command::Approx { config } => {
            let cfg = load_config(&config)?;
            commands::cmd_approx(&cfg, &mut stdout.lock())
        }
        Command::Simulate {
            config,
            seed,
            trials,
            out,
        } => {
            let cfg = load_config(&config)?;
            if out == "-" {
                commands::cmd_simulate(&cfg, seed, trials, &mut stdout.lock())
            } else {
                let mut buf = Vec::new();
                commands::cmd_simulate(&cfg, seed, trials, &mut buf)?;
                std::fs::write(&out, &buf)
                    .map_err(|e| CliError::Runtime(format!("cannot write {out}: {e}")))
            }
        }
        Command::Optimize {
            config,
            target,
            grid_step,
        } => {
            let cfg = load_config(&config)?;
            commands::cmd_optimize(&cfg, &target, grid_step, &mut stdout.lock())
        }
        Command::Overhead { config } => {
            let cfg = load_config(&config)?;
            commands::cmd_overhead(&cfg, &mut stdout.lock())
        }
        Command::Oracle { config } => {
            let cfg = load_config(&config)?;
            commands::cmd_oracle(&cfg, &mut stdout.lock())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                let _ = write!(std::io::stderr(), "{e}");
                std::process::exit(1);
            }
            let _ = write!(std::io::stdout(), "{e}");
            std::process::exit(0);
        }
    };
    if let Err(e) = run(cli) {
        // A downstream consumer closing the pipe is not our error.
        if matches!(&e, CliError::Runtime(m) if m.contains("Broken pipe")) {
            std::process::exit(0);
        }
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
