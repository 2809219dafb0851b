use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    /// No subject has a residual at or above `t`.
    #[error("empty risk set at t = {t}")]
    EmptyRiskSet { t: f64 },

    #[error("resampling design is degenerate: {0}")]
    ResamplingDegenerate(String),

    #[error("matrix is not invertible (condition number {condition:e})")]
    NonInvertible { condition: f64 },

    #[error("quantile {pi} is beyond the estimated hazard support")]
    QuantileOutOfRange { pi: f64 },

    #[error("residual {residual} lies beyond the truncation point {tau}")]
    Extrapolation { residual: f64, tau: f64 },

    #[error("only {valid} valid multiplier draws (need at least {required})")]
    InsufficientDraws { valid: usize, required: usize },

    #[error("root search did not converge: {0}")]
    NotConverged(String),

    #[error("study unstable: {failed} of {total} replicates failed")]
    StudyUnstable { failed: usize, total: usize },
}

impl Error {
    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_))
    }
}
