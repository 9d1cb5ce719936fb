use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use totc_cli::{parse_config, run, CliError, Command};

/// Time-optimal control of the heat equation: solve, value-function sweep,
/// convergence study and growth check.
#[derive(Debug, Parser)]
#[command(name = "totc", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for independent solves.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory (overrides `output_path` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(args: &Args) -> Result<(), CliError> {
    if args.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let cfg = parse_config(&args.config, args.command)?;
    let outcome = run(&cfg, args.out.as_deref())?;
    println!("{}", outcome.summary);
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    if outcome.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged("an inner solve stopped before reaching its tolerance".into()))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.stderr_line());
            ExitCode::FAILURE
        }
    }
}
