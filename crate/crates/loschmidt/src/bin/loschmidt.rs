//! CLI entry point: `loschmidt run|sweep --config <path> [--out <path>]
//! [--seed <u64>] [--quiet]`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loschmidt::config::ExperimentConfig;
use loschmidt::harness;

#[derive(Parser)]
#[command(
    name = "loschmidt",
    version,
    about = "Decoherence and Loschmidt-echo experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV time series.
    Run(CommonArgs),
    /// Run the configured parameter sweep into a directory of CSVs.
    Sweep(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path (run) or directory (sweep); overrides the config out key.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override; replaces the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the summary lines on stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is a
            // configuration problem under the exit-code contract.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> loschmidt::Result<()> {
    let (args, is_sweep) = match cli.command {
        Command::Run(args) => (args, false),
        Command::Sweep(args) => (args, true),
    };
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    if is_sweep {
        harness::sweep(&config, args.out.as_deref(), args.quiet)?;
    } else {
        harness::run(&config, args.out.as_deref(), args.quiet)?;
    }
    Ok(())
}
