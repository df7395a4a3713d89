//! Gauss–Hermite rules for expectations over a standard normal variable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node count and convergence policy for the nested quadratures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes_per_level: usize,
    /// Re-evaluate with doubled nodes and report the change.
    pub convergence_check: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            nodes_per_level: 40,
            convergence_check: false,
        }
    }
}

/// Hard cap on the size of one tensor-product grid.
pub const MAX_TENSOR_POINTS: f64 = 1e7;

impl QuadratureSpec {
    pub fn with_nodes(nodes_per_level: usize) -> Self {
        QuadratureSpec {
            nodes_per_level,
            convergence_check: false,
        }
    }

    pub fn validate(&self, levels: usize) -> Result<()> {
        if self.nodes_per_level < 8 {
            return Err(Error::Quadrature(format!(
                "nodes_per_level = {} is below the minimum of 8",
                self.nodes_per_level
            )));
        }
        let size = (self.nodes_per_level as f64).powi(levels as i32);
        if size > MAX_TENSOR_POINTS {
            return Err(Error::Budget(format!(
                "tensor grid of {} levels x {} nodes has {size:.3e} points (limit 1e7)",
                levels, self.nodes_per_level
            )));
        }
        Ok(())
    }

    pub fn doubled(&self) -> Self {
        QuadratureSpec {
            nodes_per_level: self.nodes_per_level * 2,
            convergence_check: false,
        }
    }
}

/// `E f(Z) ~ sum_i w_i f(z_i)` for `Z ~ N(0, 1)`.
#[derive(Clone, Debug)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl NormalRule {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Quadrature("rule needs at least one node".into()));
        }
        if n == 1 {
            return Ok(NormalRule {
                nodes: vec![0.0],
                weights: vec![1.0],
                log_weights: vec![0.0],
            });
        }
        let rule = gauss_quad::GaussHermite::new(n).map_err(|e| Error::Quadrature(e.to_string()))?;
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut pairs: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (x * std::f64::consts::SQRT_2, w / sqrt_pi))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // renormalize so E 1 = 1 to rounding
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let nodes = pairs.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = pairs.iter().map(|p| p.1 / total).collect();
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(NormalRule {
            nodes,
            weights,
            log_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E f(sd * Z)`.
    pub fn expect(&self, sd: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(sd * z))
            .sum()
    }

    /// `log E exp(f(sd * Z))`, evaluated stably.
    pub fn log_expect_exp(&self, sd: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(&z, &lw)| lw + f(sd * z))
            .collect();
        log_sum_exp(&terms)
    }
}

/// `log sum exp(x_i)`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log(2 cosh x)` without overflow.
#[inline]
pub fn log_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_moments_are_exact() {
        let rule = NormalRule::new(20).unwrap();
        assert_abs_diff_eq!(rule.expect(1.0, |_| 1.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.expect(1.0, |z| z), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.expect(1.0, |z| z * z), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rule.expect(2.0, |z| z.powi(4)), 3.0 * 16.0, epsilon = 1e-10);
        // E e^{sZ} = e^{s^2/2}
        assert_abs_diff_eq!(rule.log_expect_exp(0.7, |z| z), 0.245, epsilon = 1e-12);
    }

    #[test]
    fn large_rules_stay_normalized() {
        for n in [40, 80, 160] {
            let rule = NormalRule::new(n).unwrap();
            assert_abs_diff_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(rule.expect(1.0, |z| z * z), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(rule.expect(1.3, log_2cosh), {
                // compare to a fine rule
                NormalRule::new(200).unwrap().expect(1.3, log_2cosh)
            }, epsilon = 1e-6);
        }
    }

    #[test]
    fn log_2cosh_is_stable() {
        assert_abs_diff_eq!(log_2cosh(0.0), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(log_2cosh(0.5), (2.0 * 0.5f64.cosh()).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(log_2cosh(-800.0), 800.0, epsilon = 1e-12);
        assert_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln());
    }

    #[test]
    fn spec_limits() {
        assert!(QuadratureSpec::with_nodes(7).validate(1).is_err());
        assert!(QuadratureSpec::with_nodes(40).validate(4).is_ok());
        assert!(QuadratureSpec::with_nodes(40).validate(5).is_err());
    }
}
