//! The `smpr` command line: `fit`, `predict` and `simulate`.
//!
//! Exit codes: 0 on success, 2 for invalid input or I/O failure, 3 for a
//! numerical failure such as a non-convergent fit or a singular matrix.

pub mod args;
pub mod commands;
pub mod data;
pub mod error;
pub mod output;
pub mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
pub use error::{CliError, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "SMPR_THREADS";

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize =
        value.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Validation(format!("{THREADS_VAR}={value} is not a positive integer"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Validation(format!("cannot configure {threads} threads: {e}")))
}

/// The given seed, or a fresh one reported on stderr.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let seed = rand::random();
        eprintln!("smpr: using generated seed {seed}");
        seed
    })
}

pub fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Fit(args) => {
            let report = commands::fit::run(args, resolve_seed(args.seed))?;
            let out = args.out.display();
            println!("wrote {out}/fit.json and {out}/coefficients.csv");
            if let Some(inference) = &report.inference {
                for r in &inference.coefficients {
                    println!(
                        "{:<8} {:<16} est {:>10.4} se {:>8.4} p {:.4}",
                        r.component, r.covariate, r.est, r.se, r.p_value
                    );
                }
            }
        }
        Command::Predict(args) => {
            for path in commands::predict::run(args, args.seed)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Simulate(args) => {
            let summary = commands::simulate::run(args, resolve_seed(args.seed))?;
            print!("{}", summary.to_csv());
            if summary.failed > 0 {
                eprintln!(
                    "smpr: {} of {} replicates failed",
                    summary.failed,
                    summary.failed + summary.completed
                );
            }
        }
    }
    Ok(())
}

pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("smpr: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
