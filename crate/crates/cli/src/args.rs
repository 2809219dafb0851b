use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use smpr::{Tau, WeightSpec};

#[derive(Debug, Parser)]
#[command(name = "smpr", version, about = "Semiparametric location-scale survival regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model to a CSV file and report coefficients.
    Fit(FitArgs),
    /// Survivor curves, quantile ratios and Kaplan-Meier tables from a fit.
    Predict(PredictArgs),
    /// Run a simulation study on the reference design.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long, default_value = "time")]
    pub time_col: String,

    /// Event indicator column, 1 for an observed event and 0 for censoring.
    #[arg(long, default_value = "event")]
    pub event_col: String,

    /// Location covariates, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub x_cols: Vec<String>,

    /// Scale covariates, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub z_cols: Vec<String>,

    /// The time column already holds log times.
    #[arg(long)]
    pub log_time: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Truncation point on the residual scale, or `inf`.
    #[arg(long, default_value = "inf")]
    pub tau: Tau,

    /// Weight function: logrank, gehan or normal.
    #[arg(long, default_value = "logrank")]
    pub weight: WeightSpec,

    /// Number of perturbation and multiplier draws.
    #[arg(long, default_value_t = smpr::inference::DEFAULT_DRAWS)]
    pub m: usize,

    /// Confidence level of reported intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,

    /// Seed for all resampling; generated and recorded when omitted.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Starting coefficients `beta..., gamma...`, comma separated. Defaults to
    /// a censored normal fit.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// `fit.json` written by `smpr fit`.
    #[arg(long)]
    pub fit: PathBuf,

    /// CSV of covariate profiles: an optional `profile` name column and one
    /// column per covariate of the fit.
    #[arg(long)]
    pub profiles: PathBuf,

    /// Data file; defaults to the one recorded in the fit.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Column defining the groups of the Kaplan-Meier tables.
    #[arg(long)]
    pub group_col: Option<String>,

    /// Number of multiplier draws; defaults to the fit's.
    #[arg(long)]
    pub m: Option<usize>,

    /// Band level; defaults to the fit's.
    #[arg(long)]
    pub level: Option<f64>,

    /// Defaults to the fit's seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Subjects per replicate.
    #[arg(long, default_value_t = 100)]
    pub n: usize,

    /// Target censored fraction.
    #[arg(long, default_value_t = 0.2)]
    pub cens: f64,

    #[arg(long, default_value = "inf")]
    pub tau: Tau,

    #[arg(long, default_value = "logrank")]
    pub weight: WeightSpec,

    #[arg(long, default_value_t = 500)]
    pub replicates: usize,

    /// Draws per replicate.
    #[arg(long, default_value_t = smpr::inference::DEFAULT_DRAWS)]
    pub m: usize,

    /// True coefficients `beta1,beta2[,gamma1]`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1,1,1")]
    pub theta: Vec<f64>,

    /// Generated and printed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}
