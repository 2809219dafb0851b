use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use smpr::functionals::{ratio_curve, ratio_pi_grid, survivor_curve, survivor_jump_times};
use smpr::{analyze, kaplan_meier, objective, CovariateProfile, InferenceConfig, ModelState};

use crate::args::PredictArgs;
use crate::data::{self, parse_number, reader, ColumnMap};
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, file_stem, float, Table};
use crate::report::FitReport;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedProfile {
    pub name: String,
    pub profile: CovariateProfile,
}

/// Reads profiles: an optional `profile` column naming each row and one
/// column per covariate.
pub fn load_profiles(path: &Path, columns: &ColumnMap) -> Result<Vec<NamedProfile>> {
    let mut rdr = reader(path)?;
    let headers =
        rdr.headers().map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?.clone();
    let index = |name: &str| headers.iter().position(|h| h == name);
    let name_col = index("profile");
    let mut covariate_col = BTreeMap::new();
    for name in columns.covariates() {
        let k = index(&name).ok_or_else(|| {
            CliError::Validation(format!("{}: profile file lacks covariate column `{name}`", path.display()))
        })?;
        covariate_col.insert(name, k);
    }

    let mut out: Vec<NamedProfile> = Vec::new();
    let mut names = BTreeSet::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let value =
            |name: &String| parse_number(record.get(covariate_col[name]).unwrap_or(""), name, line, path);
        let x = columns.x.iter().map(value).collect::<Result<Vec<_>>>()?;
        let z = columns.z.iter().map(value).collect::<Result<Vec<_>>>()?;
        let name = match name_col {
            Some(k) => record.get(k).unwrap_or("").to_string(),
            None => format!("profile{}", row + 1),
        };
        if !names.insert(file_stem(&name)) {
            return Err(CliError::Validation(format!(
                "{} line {line}: duplicate profile name `{name}`",
                path.display()
            )));
        }
        out.push(NamedProfile { name, profile: CovariateProfile::new(x, z)? });
    }
    if out.is_empty() {
        return Err(CliError::Validation(format!("{}: no profiles", path.display())));
    }
    Ok(out)
}

fn read_fit(path: &Path) -> Result<FitReport> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: not a fit report: {e}", path.display())))
}

/// Files written, in order.
pub fn run(args: &PredictArgs, seed_override: Option<u64>) -> Result<Vec<PathBuf>> {
    let report = read_fit(&args.fit)?;
    if !report.fit.converged {
        return Err(CliError::Numerical(format!(
            "{}: the recorded fit did not converge",
            args.fit.display()
        )));
    }
    let config = &report.config;
    let input = args.input.clone().unwrap_or_else(|| config.input.clone());
    let level = args.level.unwrap_or(config.level);
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Validation(format!("--level {level} not in (0, 1)")));
    }
    let m = args.m.unwrap_or(config.m);
    let seed = seed_override.unwrap_or(config.seed);

    let loaded = data::load(&input, &config.columns, args.group_col.as_deref())?;
    let data = &loaded.dataset;
    let fitted = &report.fit;
    let recomputed = objective(data, &fitted.theta_hat, &fitted.estimator)?;
    if data.len() != fitted.n || recomputed != fitted.objective_value {
        return Err(CliError::Validation(format!(
            "{} does not hold the data the fit was computed on",
            input.display()
        )));
    }
    let profiles = load_profiles(&args.profiles, &config.columns)?;

    let inference = analyze(data, fitted, &[], &InferenceConfig { m, seed })?;
    let state = ModelState::from_fit(fitted);
    let draws = ModelState::from_draws(&inference.draws, fitted.estimator.tau);

    ensure_dir(&args.out)?;
    let mut written = Vec::new();
    for p in &profiles {
        let times = survivor_jump_times(&state, &p.profile)?;
        let curve = survivor_curve(&state, &draws, &p.profile, &times, level)?;
        let mut table = Table::new(&["time", "survival", "lower", "upper", "valid_draws"]);
        for point in curve {
            table.row([
                float(point.time),
                float(point.band.estimate),
                float(point.band.lo),
                float(point.band.hi),
                point.band.valid_draws.to_string(),
            ]);
        }
        let path = args.out.join(format!("survivor_{}.csv", file_stem(&p.name)));
        table.write(&path)?;
        written.push(path);
    }

    let pis = ratio_pi_grid();
    for (i, pi) in profiles.iter().enumerate() {
        for pj in &profiles[i + 1..] {
            let curve = ratio_curve(&state, &draws, &pj.profile, &pi.profile, &pis, level)?;
            let mut table = Table::new(&["pi", "ratio", "lower", "upper", "valid_draws"]);
            for point in curve {
                table.row([
                    float(point.pi),
                    float(point.band.estimate),
                    float(point.band.lo),
                    float(point.band.hi),
                    point.band.valid_draws.to_string(),
                ]);
            }
            let path = args.out.join(format!("ratio_{}_vs_{}.csv", file_stem(&pj.name), file_stem(&pi.name)));
            table.write(&path)?;
            written.push(path);
        }
    }

    let times: Vec<f64> = data.observations().iter().map(|o| o.log_time.exp()).collect();
    let events: Vec<bool> = data.observations().iter().map(|o| o.event).collect();
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    match &loaded.groups {
        Some(labels) => {
            for (i, g) in labels.iter().enumerate() {
                groups.entry(g.clone()).or_default().push(i);
            }
        }
        None => {
            groups.insert("all".into(), (0..data.len()).collect());
        }
    }
    let mut stems = BTreeSet::new();
    for (label, members) in &groups {
        let stem = file_stem(label);
        if !stems.insert(stem.clone()) {
            return Err(CliError::Validation(format!("group labels collide after sanitizing: `{label}`")));
        }
        let t: Vec<f64> = members.iter().map(|&i| times[i]).collect();
        let d: Vec<bool> = members.iter().map(|&i| events[i]).collect();
        let mut table = Table::new(&["time", "survival", "at_risk", "events"]);
        for point in kaplan_meier(&t, &d)? {
            table.row([
                float(point.time),
                float(point.survival),
                point.at_risk.to_string(),
                point.events.to_string(),
            ]);
        }
        let path = args.out.join(format!("km_{stem}.csv"));
        table.write(&path)?;
        written.push(path);
    }
    Ok(written)
}
