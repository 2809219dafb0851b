//! Weight families for the rank score. Each family supplies `rho(u)`; the
//! location block uses `rho(u)` and the scale block `rho(u) * u + 1`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSpec {
    /// `rho(u) = 1`; efficient under extreme-value errors.
    LogRank,
    /// `rho(u)` = fraction of the sample still at risk at `u`.
    Gehan,
    /// `rho(u) = f(u) / (1 - F(u)) - u` for the standard normal; efficient
    /// under normal errors.
    Normal,
}

/// Above this point the normal hazard is evaluated by continued fraction.
const NORMAL_TAIL_SWITCH: f64 = 8.0;
const CONTINUED_FRACTION_DEPTH: u32 = 200;

impl WeightSpec {
    pub fn rho(self, u: f64, at_risk_fraction: f64) -> f64 {
        match self {
            WeightSpec::LogRank => 1.0,
            WeightSpec::Gehan => at_risk_fraction,
            WeightSpec::Normal => normal_hazard_minus_identity(u),
        }
    }

    /// `(rho_beta, rho_gamma)` at `u`.
    pub fn eval(self, u: f64, at_risk_fraction: f64) -> (f64, f64) {
        let rho = self.rho(u, at_risk_fraction);
        (rho, rho * u + 1.0)
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightSpec::LogRank => "logrank",
            WeightSpec::Gehan => "gehan",
            WeightSpec::Normal => "normal",
        }
    }
}

pub fn weight_eval(spec: WeightSpec, u: f64, at_risk_fraction: f64) -> (f64, f64) {
    spec.eval(u, at_risk_fraction)
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "logrank" | "log-rank" => Ok(WeightSpec::LogRank),
            "gehan" => Ok(WeightSpec::Gehan),
            "normal" => Ok(WeightSpec::Normal),
            other => Err(Error::InvalidInput(format!("unknown weight `{other}`"))),
        }
    }
}

/// `phi(u) / (1 - Phi(u)) - u`.
///
/// Writing the Mills ratio as `1 / (u + K(u))` with
/// `K(u) = 1 / (u + 2 / (u + 3 / (u + ...)))`, the quantity is exactly
/// `K(u)`, so the tail branch never subtracts two large numbers.
pub(crate) fn normal_hazard_minus_identity(u: f64) -> f64 {
    if u > NORMAL_TAIL_SWITCH {
        let mut tail = 0.0;
        for k in (1..=CONTINUED_FRACTION_DEPTH).rev() {
            tail = f64::from(k) / (u + tail);
        }
        tail
    } else {
        let density = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
        let survival = 0.5 * erfc(u * FRAC_1_SQRT_2);
        density / survival - u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_rank_and_gehan() {
        assert_eq!(weight_eval(WeightSpec::LogRank, 0.0, 0.3), (1.0, 1.0));
        assert_eq!(weight_eval(WeightSpec::LogRank, -2.0, 0.3), (1.0, -1.0));
        assert_eq!(weight_eval(WeightSpec::Gehan, 2.0, 0.5), (0.5, 2.0));
    }

    #[test]
    fn normal_at_zero_is_sqrt_two_over_pi() {
        let (b, g) = weight_eval(WeightSpec::Normal, 0.0, 1.0);
        assert!((b - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert!((b - 0.797_884_560_802_865_4).abs() < 1e-15);
        assert_eq!(g, 1.0);
    }

    #[test]
    fn normal_matches_high_precision_values() {
        // 50-digit reference values of phi(u)/(1-Phi(u)) - u.
        let reference = [
            (-3.0, 3.004_437_839_042_125_663_8),
            (1.0, 0.525_135_276_160_981_209_09),
            (5.0, 0.186_503_967_125_842_115_62),
            (7.5, 0.128_966_391_103_765_916_67),
            (8.0, 0.121_368_112_236_112_680_65),
            (8.5, 0.114_595_320_165_172_874_13),
            (10.0, 0.098_093_233_962_511_962_844),
            (20.0, 0.049_753_068_527_850_542_214),
            (40.0, 0.024_968_847_207_263_723_245),
            (100.0, 0.009_998_000_999_260_705_184_9),
        ];
        for (u, want) in reference {
            let got = normal_hazard_minus_identity(u);
            let rel = ((got - want) / want).abs();
            let tol = if u > NORMAL_TAIL_SWITCH { 1e-10 } else { 1e-12 };
            assert!(rel < tol, "u = {u}: got {got}, want {want}, rel {rel}");
        }
    }

    #[test]
    fn normal_never_nan() {
        for i in -4000..4000 {
            let u = f64::from(i) * 0.1;
            let (b, g) = weight_eval(WeightSpec::Normal, u, 1.0);
            assert!(b.is_finite() && g.is_finite(), "u = {u}");
        }
    }

    #[test]
    fn scale_weight_identity() {
        for spec in [WeightSpec::LogRank, WeightSpec::Gehan, WeightSpec::Normal] {
            for u in [-4.0, -0.3, 0.0, 1.7, 9.0] {
                let (b, g) = spec.eval(u, 0.25);
                assert_eq!(g, b * u + 1.0);
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("logrank".parse::<WeightSpec>().unwrap(), WeightSpec::LogRank);
        assert_eq!("Gehan".parse::<WeightSpec>().unwrap(), WeightSpec::Gehan);
        assert!("efficient".parse::<WeightSpec>().is_err());
    }
}
