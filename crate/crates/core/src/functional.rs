//! Closed menu of path functionals `X(g_1, ..., g_k)` of the scalar node marks
//! along a cascade path, and separable two-path functionals built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::log_2cosh;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathFunctional {
    Constant { value: f64 },
    /// `sum_l a_l g_l`.
    Linear { coefficients: Vec<f64> },
    /// `sum_l a_l g_l + c (sum_l g_l)^2`.
    Quadratic { coefficients: Vec<f64>, square: f64 },
    /// `log 2 cosh(scale * sum_l g_l + shift)`.
    LogCosh { scale: f64, shift: f64 },
}

impl PathFunctional {
    pub fn constant(value: f64) -> Self {
        PathFunctional::Constant { value }
    }

    pub fn linear(coefficients: &[f64]) -> Self {
        PathFunctional::Linear {
            coefficients: coefficients.to_vec(),
        }
    }

    pub fn quadratic(coefficients: &[f64], square: f64) -> Self {
        PathFunctional::Quadratic {
            coefficients: coefficients.to_vec(),
            square,
        }
    }

    pub fn log_cosh(scale: f64, shift: f64) -> Self {
        PathFunctional::LogCosh { scale, shift }
    }

    /// Evaluates on the marks of a full path or of a path prefix
    /// (missing levels contribute nothing).
    pub fn eval(&self, marks: &[f64]) -> f64 {
        match self {
            PathFunctional::Constant { value } => *value,
            PathFunctional::Linear { coefficients } => marks.iter().zip(coefficients).map(|(g, a)| g * a).sum(),
            PathFunctional::Quadratic { coefficients, square } => {
                let lin: f64 = marks.iter().zip(coefficients).map(|(g, a)| g * a).sum();
                let s: f64 = marks.iter().sum();
                lin + square * s * s
            }
            PathFunctional::LogCosh { scale, shift } => log_2cosh(scale * marks.iter().sum::<f64>() + shift),
        }
    }

    /// Checks the coefficient count and that `E exp(X)` is finite for marks
    /// with the given per-level standard deviations.
    pub fn validate(&self, mark_sd: &[f64]) -> Result<()> {
        let k = mark_sd.len();
        match self {
            PathFunctional::Linear { coefficients } | PathFunctional::Quadratic { coefficients, .. }
                if coefficients.len() != k =>
            {
                Err(Error::Domain(format!(
                    "functional has {} coefficients for a depth-{k} cascade",
                    coefficients.len()
                )))
            }
            PathFunctional::Quadratic { square, .. } => {
                let var: f64 = mark_sd.iter().map(|s| s * s).sum();
                if 2.0 * square * var >= 1.0 {
                    Err(Error::Domain(format!(
                        "quadratic coefficient {square} makes E exp X infinite (needs 2 c Var < 1, Var = {var})"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// `Y(alpha, beta) = f(Z_alpha) g(Z_beta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFunctional {
    pub left: PathFunctional,
    pub right: PathFunctional,
}

impl PairFunctional {
    pub fn one() -> Self {
        PairFunctional {
            left: PathFunctional::constant(1.0),
            right: PathFunctional::constant(1.0),
        }
    }

    pub fn product(left: PathFunctional, right: PathFunctional) -> Self {
        PairFunctional { left, right }
    }
}

/// Observable averaged by the tilting identities: one path or a pair of paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arity", rename_all = "snake_case")]
pub enum Observable {
    Single(PathFunctional),
    Pair(PairFunctional),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation() {
        let marks = [0.5, -1.0];
        assert_eq!(PathFunctional::constant(2.0).eval(&marks), 2.0);
        assert_eq!(PathFunctional::linear(&[2.0, 1.0]).eval(&marks), 0.0);
        assert_eq!(PathFunctional::quadratic(&[0.0, 1.0], 0.5).eval(&marks), -1.0 + 0.125);
        assert!((PathFunctional::log_cosh(1.0, 0.0).eval(&marks) - (2.0 * 0.5f64.cosh()).ln()).abs() < 1e-15);
        assert_eq!(PathFunctional::linear(&[2.0, 1.0]).eval(&marks[..1]), 1.0);
    }

    #[test]
    fn validation() {
        assert!(PathFunctional::linear(&[1.0]).validate(&[1.0, 1.0]).is_err());
        assert!(PathFunctional::quadratic(&[0.0, 0.0], 0.3).validate(&[1.0, 1.0]).is_err());
        assert!(PathFunctional::quadratic(&[0.0, 0.0], 0.2).validate(&[1.0, 1.0]).is_ok());
    }
}
