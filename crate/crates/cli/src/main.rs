use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use phonon_forge_cli::{run, RunArgs, RunKind};

/// Trapped-ion phonon laser simulator.
#[derive(Debug, Parser)]
#[command(name = "phonon-forge", version)]
struct Cli {
    /// Pipeline to run.
    #[arg(value_enum)]
    kind: RunKind,
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Neither read nor write the decomposition cache.
    #[arg(long)]
    no_cache: bool,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let args = RunArgs {
        kind: cli.kind,
        config: cli.config,
        jobs: cli.jobs,
        no_cache: cli.no_cache,
        out: cli.out,
    };
    match run(&args) {
        Ok(manifest) => {
            if let Some(files) = manifest["files"].as_array() {
                for f in files {
                    println!("{}", f.as_str().unwrap_or_default());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
