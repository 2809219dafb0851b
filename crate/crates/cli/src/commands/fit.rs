use smpr::{analyze, fit, EstimatorConfig, InferenceConfig, SolverConfig, Theta};

use crate::args::FitArgs;
use crate::data::{self, ColumnMap};
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, write_json};
use crate::report::{coefficient_table, inference_report, AnalysisConfig, FitReport};

pub fn run(args: &FitArgs, seed: u64) -> Result<FitReport> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::Validation(format!("--level {} not in (0, 1)", args.level)));
    }
    let columns = ColumnMap::from(&args.data);
    let loaded = data::load(&args.data.input, &columns, None)?;
    let data = &loaded.dataset;
    let estimator = EstimatorConfig { tau: args.tau, weight: args.weight };
    let solver = match &args.init {
        Some(values) => {
            if values.len() != data.dim() {
                return Err(CliError::Validation(format!(
                    "--init has {} values, the model has {} coefficients",
                    values.len(),
                    data.dim()
                )));
            }
            SolverConfig::new(Theta::from_flat(values, data.p())?)
        }
        None => SolverConfig::from_pilot(data)?,
    };
    let fitted = fit(data, &estimator, &solver)?;

    let inference = if fitted.converged {
        let result = analyze(data, &fitted, &[], &InferenceConfig { m: args.m, seed })?;
        Some(inference_report(&columns, &fitted, &result)?)
    } else {
        None
    };
    let report = FitReport {
        config: AnalysisConfig {
            input: args.data.input.clone(),
            columns,
            tau: args.tau,
            weight: args.weight,
            m: args.m,
            level: args.level,
            seed,
        },
        n: data.len(),
        events: data.n_events(),
        fit: fitted,
        inference,
    };

    ensure_dir(&args.out)?;
    write_json(&args.out.join("fit.json"), &report)?;
    if let Some(inference) = &report.inference {
        coefficient_table(&inference.coefficients).write(&args.out.join("coefficients.csv"))?;
    }
    if !report.fit.converged {
        return Err(CliError::Numerical(format!(
            "{}; fit.json records the last iterate",
            report.fit.diagnostic.clone().unwrap_or_else(|| "root search did not converge".into())
        )));
    }
    Ok(report)
}
