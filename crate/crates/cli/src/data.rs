//! CSV ingestion.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use smpr::{Observation, SurvivalDataset};

use crate::args::DataArgs;
use crate::error::{CliError, Result};

/// Column mapping of a survival data file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub time: String,
    pub event: String,
    pub x: Vec<String>,
    pub z: Vec<String>,
    /// Times are already on the log scale.
    pub log_time: bool,
}

impl From<&DataArgs> for ColumnMap {
    fn from(args: &DataArgs) -> Self {
        Self {
            time: args.time_col.clone(),
            event: args.event_col.clone(),
            x: args.x_cols.clone(),
            z: args.z_cols.clone(),
            log_time: args.log_time,
        }
    }
}

impl ColumnMap {
    fn check(&self) -> Result<()> {
        if self.x.is_empty() && self.z.is_empty() {
            return Err(CliError::Validation(
                "at least one covariate column is required (--x-cols or --z-cols)".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for name in self.x.iter() {
            if !seen.insert(name) {
                return Err(CliError::Validation(format!("column `{name}` listed twice in --x-cols")));
            }
        }
        let mut seen = BTreeSet::new();
        for name in self.z.iter() {
            if !seen.insert(name) {
                return Err(CliError::Validation(format!("column `{name}` listed twice in --z-cols")));
            }
        }
        Ok(())
    }

    /// Every covariate name once, location covariates first.
    pub fn covariates(&self) -> Vec<String> {
        let mut out = self.x.clone();
        for name in &self.z {
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: SurvivalDataset,
    /// Values of the grouping column, when one was requested.
    pub groups: Option<Vec<String>>,
}

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| {
        CliError::Validation(format!("{}: column `{name}` not found in header", path.display()))
    })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.kind() {
        csv::ErrorKind::Io(_) => {
            CliError::Io { context: path.display().to_string(), source: std::io::Error::other(e.to_string()) }
        }
        _ => CliError::Validation(format!("{}: {e}", path.display())),
    }
}

pub(crate) fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

pub(crate) fn parse_number(value: &str, name: &str, line: u64, path: &Path) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| {
        CliError::Validation(format!(
            "{} line {line}: column `{name}`: cannot parse `{value}` as a number",
            path.display()
        ))
    })?;
    if !v.is_finite() {
        return Err(CliError::Validation(format!(
            "{} line {line}: column `{name}`: value `{value}` is not finite",
            path.display()
        )));
    }
    Ok(v)
}

/// Reads `path` into a dataset; rows keep file order.
pub fn load(path: &Path, columns: &ColumnMap, group_col: Option<&str>) -> Result<Loaded> {
    columns.check()?;
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let time = column_index(&headers, &columns.time, path)?;
    let event = column_index(&headers, &columns.event, path)?;
    let x = columns.x.iter().map(|c| column_index(&headers, c, path)).collect::<Result<Vec<_>>>()?;
    let z = columns.z.iter().map(|c| column_index(&headers, c, path)).collect::<Result<Vec<_>>>()?;
    let group = group_col.map(|c| column_index(&headers, c, path)).transpose()?;

    let mut observations = Vec::new();
    let mut groups = group.map(|_| Vec::new());
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| record.get(k).unwrap_or("");
        let raw_time = parse_number(field(time), &columns.time, line, path)?;
        let log_time = if columns.log_time {
            raw_time
        } else if raw_time > 0.0 {
            raw_time.ln()
        } else {
            return Err(CliError::Validation(format!(
                "{} line {line}: time {raw_time} must be positive (pass --log-time for log times)",
                path.display()
            )));
        };
        let delta = match field(event) {
            "1" | "1.0" => true,
            "0" | "0.0" => false,
            other => {
                return Err(CliError::Validation(format!(
                    "{} line {line}: column `{}`: event must be 0 or 1, got `{other}`",
                    path.display(),
                    columns.event
                )))
            }
        };
        let xs = x
            .iter()
            .zip(&columns.x)
            .map(|(&k, name)| parse_number(field(k), name, line, path))
            .collect::<Result<Vec<_>>>()?;
        let zs = z
            .iter()
            .zip(&columns.z)
            .map(|(&k, name)| parse_number(field(k), name, line, path))
            .collect::<Result<Vec<_>>>()?;
        observations.push(Observation::new(log_time, delta, xs, zs)?);
        if let (Some(k), Some(g)) = (group, groups.as_mut()) {
            g.push(field(k).to_string());
        }
    }
    if observations.is_empty() {
        return Err(CliError::Validation(format!("{}: no data rows", path.display())));
    }
    let dataset = SurvivalDataset::new(observations, columns.x.len(), columns.z.len())?;
    if dataset.n_events() == 0 {
        return Err(CliError::Validation(format!("{}: data contain no events", path.display())));
    }
    Ok(Loaded { dataset, groups })
}
