use smpr::{run_study, Scenario, StudySummary, Theta};

use crate::args::SimulateArgs;
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, write_atomic, write_json};

pub fn scenario(args: &SimulateArgs, seed: u64) -> Result<Scenario> {
    let theta_true = match args.theta.as_slice() {
        [b1, b2] => Theta::new(vec![*b1, *b2], vec![])?,
        [b1, b2, g1] => Theta::new(vec![*b1, *b2], vec![*g1])?,
        other => {
            return Err(CliError::Validation(format!("--theta takes 2 or 3 values, got {}", other.len())))
        }
    };
    let scenario = Scenario {
        replicates: args.replicates,
        m: args.m,
        theta_true,
        ..Scenario::reference(args.n, args.cens, args.tau, args.weight, seed)
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn run(args: &SimulateArgs, seed: u64) -> Result<StudySummary> {
    let scenario = scenario(args, seed)?;
    let summary = run_study(&scenario)?;
    ensure_dir(&args.out)?;
    write_atomic(&args.out.join("summary.csv"), summary.to_csv().as_bytes())?;
    write_json(&args.out.join("summary.json"), &summary)?;
    Ok(summary)
}
