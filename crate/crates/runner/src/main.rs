use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hartree_dm::{run_command, validate_command, CliOptions};

/// Spectral density-matrix Hartree simulator.
#[derive(Parser)]
#[command(name = "hartree-dm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    config: PathBuf,
    /// Directory for all output artifacts (default: current directory).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Replace the configured perturbation / master seed.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment (evolve, conserve-sweep, integrator-compare).
    Run(RunArgs),
    /// Run an inequality sampling campaign.
    Campaign(RunArgs),
    /// Check a configuration file without running anything.
    Validate {
        /// Experiment configuration (JSON).
        config: PathBuf,
        /// Suppress the confirmation line.
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => run_command(
            &args.config,
            &CliOptions {
                output_dir: args.output_dir,
                seed_override: args.seed_override,
                quiet: args.quiet,
            },
            false,
        ),
        Command::Campaign(args) => run_command(
            &args.config,
            &CliOptions {
                output_dir: args.output_dir,
                seed_override: args.seed_override,
                quiet: args.quiet,
            },
            true,
        ),
        Command::Validate { config, quiet } => validate_command(&config, quiet),
    };
    ExitCode::from(code as u8)
}
