//! Monte Carlo estimates and the single tolerance rule used by every check.

use serde::{Deserialize, Serialize};

/// Mean over independent replicas with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: usize,
}

impl Estimate {
    /// Sample mean and `sd / sqrt(n)`, summed in slice order.
    pub fn from_samples(samples: &[f64]) -> Estimate {
        let n = samples.len();
        assert!(n >= 2, "an estimate needs at least two replicas");
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        Estimate {
            mean,
            std_error: (var / n as f64).sqrt(),
            replicas: n,
        }
    }

    /// A value known exactly (quadrature, closed form).
    pub fn exact(value: f64) -> Estimate {
        Estimate {
            mean: value,
            std_error: 0.0,
            replicas: 0,
        }
    }

    pub fn combined_se(&self, other: &Estimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

/// An estimate together with a bound on its deterministic (truncation) bias.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedEstimate {
    pub estimate: Estimate,
    pub allowance: f64,
}

/// Two sides of an identity, each estimated independently, plus the
/// truncation allowance that applies to their difference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatePair {
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub allowance: f64,
}

impl EstimatePair {
    pub fn check(&self, name: impl Into<String>, sigmas: f64) -> CheckRecord {
        CheckRecord::equality(name, self.lhs, self.rhs, sigmas, self.allowance)
    }
}

/// Default multiplier on the combined standard error.
pub const DEFAULT_SIGMAS: f64 = 3.0;

/// One identity or inequality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// `|lhs - rhs| <= sigmas * sqrt(se_l^2 + se_r^2) + allowance`.
    pub fn equality(name: impl Into<String>, lhs: Estimate, rhs: Estimate, sigmas: f64, allowance: f64) -> Self {
        let tolerance = sigmas * lhs.combined_se(&rhs) + allowance;
        CheckRecord {
            name: name.into(),
            lhs: lhs.mean,
            lhs_se: lhs.std_error,
            rhs: rhs.mean,
            rhs_se: rhs.std_error,
            tolerance,
            pass: (lhs.mean - rhs.mean).abs() <= tolerance,
        }
    }

    /// `lhs - rhs <= sigmas * sqrt(se_l^2 + se_r^2) + allowance`.
    pub fn at_most(name: impl Into<String>, lhs: Estimate, rhs: Estimate, sigmas: f64, allowance: f64) -> Self {
        let tolerance = sigmas * lhs.combined_se(&rhs) + allowance;
        CheckRecord {
            name: name.into(),
            lhs: lhs.mean,
            lhs_se: lhs.std_error,
            rhs: rhs.mean,
            rhs_se: rhs.std_error,
            tolerance,
            pass: lhs.mean - rhs.mean <= tolerance,
        }
    }

    /// Strict inequality `lhs < rhs` between deterministic values.
    pub fn strictly_below(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        CheckRecord {
            name: name.into(),
            lhs,
            lhs_se: 0.0,
            rhs,
            rhs_se: 0.0,
            tolerance: 0.0,
            pass: lhs < rhs,
        }
    }
}
