use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use frozen_star::config::load_config;
use frozen_star::run::run;

/// Forward and inverse spectral solver for star graphs with frozen arguments.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Accepted for compatibility; every command is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(&cli.config).and_then(|cfg| run(&cfg, &cli.out));
    match result {
        Ok(outcome) => {
            if cli.verbose {
                for f in &outcome.files {
                    eprintln!("wrote {}", f.display());
                }
            }
            println!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code())
        }
    }
}
