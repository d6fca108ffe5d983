use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nsshape_cli::{parse_config, run_subcommand, RunError, Subcommand};

/// Shape optimization of an obstacle in unsteady Navier-Stokes flow.
#[derive(Debug, Parser)]
#[command(name = "nsshape", version)]
struct Args {
    command: Subcommand,
    #[arg(long)]
    config: PathBuf,
    /// Overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `[output] snapshots`.
    #[arg(long)]
    snapshots: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let mut config = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(out) = args.out {
        config.output.dir = out;
    }
    if let Some(k) = args.snapshots {
        config.output.snapshots = k;
    }
    match run_subcommand(args.command, &config) {
        Ok(report) => {
            println!("{}", report.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let RunError::Core(inner) = &e {
                let mut source = std::error::Error::source(inner);
                while let Some(s) = source {
                    eprintln!("  caused by: {s}");
                    source = s.source();
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
