//! Covariance function of the mixed p-spin model and the RSB parameter sequences.
//!
//! The mixture `{(p, beta_p)}` defines
//!
//! ```text
//! xi(x) = 1/2 * sum_p beta_p^2 x^p
//! ```
//!
//! so that the pure `p = 2` mixture with `beta` is the SK model at inverse
//! temperature `beta`, `xi(x) = beta^2 x^2 / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the `[-1, 1]` domain checks.
const DOMAIN_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureFunction {
    terms: Vec<(u32, f64)>,
}

impl MixtureFunction {
    /// Validates and builds a mixture from `(p, beta_p)` pairs.
    ///
    /// Convexity on `[-1, 1]` is enforced structurally: every `p` must be even,
    /// except for an optional linear term `p = 1`.
    pub fn new(coefficients: &[(u32, f64)]) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Mixture("coefficient list is empty".into()));
        }
        let mut terms = Vec::with_capacity(coefficients.len());
        for &(p, beta) in coefficients {
            if p == 0 {
                return Err(Error::Mixture("constant term p = 0 is not allowed (xi(0) must be 0)".into()));
            }
            if p != 1 && p % 2 == 1 {
                return Err(Error::Mixture(format!(
                    "odd power p = {p} breaks convexity on [-1, 1]; only p = 1 and even p are allowed"
                )));
            }
            if !(beta.is_finite() && beta > 0.0) {
                return Err(Error::Mixture(format!("beta_{p} = {beta} must be finite and > 0")));
            }
            if terms.iter().any(|&(q, _)| q == p) {
                return Err(Error::Mixture(format!("power p = {p} listed twice")));
            }
            terms.push((p, beta));
        }
        terms.sort_by_key(|&(p, _)| p);
        Ok(MixtureFunction { terms })
    }

    /// SK model at inverse temperature `beta`; `beta = 0` gives [`Self::zero`].
    pub fn sk(beta: f64) -> Result<Self> {
        if beta == 0.0 {
            return Ok(Self::zero());
        }
        Self::new(&[(2, beta)])
    }

    /// The disorder-free model, `xi == 0`.
    pub fn zero() -> Self {
        MixtureFunction { terms: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    pub fn max_power(&self) -> u32 {
        self.terms.iter().map(|t| t.0).max().unwrap_or(0)
    }

    pub fn xi(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(p, b)| 0.5 * b * b * x.powi(p as i32)).sum()
    }

    pub fn xi_prime(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(p, b)| 0.5 * b * b * p as f64 * x.powi(p as i32 - 1))
            .sum()
    }

    pub fn xi_second(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .filter(|&&(p, _)| p >= 2)
            .map(|&(p, b)| 0.5 * b * b * (p * (p - 1)) as f64 * x.powi(p as i32 - 2))
            .sum()
    }

    /// `theta(x) = x xi'(x) - xi(x)`.
    pub fn theta(&self, x: f64) -> f64 {
        x * self.xi_prime(x) - self.xi(x)
    }

    /// `Delta(a, b) = xi(a) - a xi'(b) + theta(b)`, nonnegative by convexity.
    pub fn delta(&self, a: f64, b: f64) -> f64 {
        self.xi(a) - a * self.xi_prime(b) + self.theta(b)
    }

    pub fn checked_theta(&self, x: f64) -> Result<f64> {
        check_unit(x, "x")?;
        Ok(self.theta(x))
    }

    pub fn checked_delta(&self, a: f64, b: f64) -> Result<f64> {
        check_unit(a, "a")?;
        check_unit(b, "b")?;
        Ok(self.delta(a, b))
    }
}

fn check_unit(x: f64, name: &str) -> Result<()> {
    if x.is_finite() && x.abs() <= 1.0 + DOMAIN_EPS {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} must lie in [-1, 1]")))
    }
}

/// Overlap `R = N^-1 sigma^1 . sigma^2` of two configurations stored as bit
/// masks (bit `i` set means `sigma_i = -1`).
pub fn overlap(n: usize, a: u32, b: u32) -> f64 {
    1.0 - 2.0 * (a ^ b).count_ones() as f64 / n as f64
}

/// The sequences `0 = m_0 < m_1 < ... < m_k <= 1` and
/// `0 = q_0 < q_1 < ... < q_k < q_{k+1} = 1`, both stored with their endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsbParams {
    m: Vec<f64>,
    q: Vec<f64>,
}

impl RsbParams {
    /// Builds from the interior values `m_1..m_k` and `q_1..q_k`.
    pub fn new(m: &[f64], q: &[f64]) -> Result<Self> {
        let k = m.len();
        if k == 0 {
            return Err(Error::Rsb("k must be at least 1".into()));
        }
        if q.len() != k {
            return Err(Error::Rsb(format!("m has {k} entries but q has {}", q.len())));
        }
        if m.iter().chain(q).any(|x| !x.is_finite()) {
            return Err(Error::Rsb("non-finite entry".into()));
        }
        let mut mm = Vec::with_capacity(k + 1);
        mm.push(0.0);
        mm.extend_from_slice(m);
        let mut qq = Vec::with_capacity(k + 2);
        qq.push(0.0);
        qq.extend_from_slice(q);
        qq.push(1.0);
        if let Some(i) = (1..mm.len()).find(|&i| mm[i] <= mm[i - 1]) {
            return Err(Error::Rsb(format!(
                "m must be strictly increasing from m_0 = 0: m_{} = {} <= m_{} = {}",
                i,
                mm[i],
                i - 1,
                mm[i - 1]
            )));
        }
        if mm[k] > 1.0 {
            return Err(Error::Rsb(format!("m_k = {} exceeds 1", mm[k])));
        }
        if let Some(i) = (1..qq.len()).find(|&i| qq[i] <= qq[i - 1]) {
            return Err(Error::Rsb(format!(
                "q must be strictly increasing from q_0 = 0 to q_(k+1) = 1: q_{} = {} <= q_{} = {}",
                i,
                qq[i],
                i - 1,
                qq[i - 1]
            )));
        }
        Ok(RsbParams { m: mm, q: qq })
    }

    pub fn k(&self) -> usize {
        self.m.len() - 1
    }

    /// `m_0..m_k`.
    pub fn m(&self) -> &[f64] {
        &self.m
    }

    /// `q_0..q_{k+1}`.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Interior `m_1..m_k`.
    pub fn m_interior(&self) -> &[f64] {
        &self.m[1..]
    }

    /// Interior `q_1..q_k`.
    pub fn q_interior(&self) -> &[f64] {
        &self.q[1..=self.k()]
    }

    /// Simulated cascades need `m_k < 1`.
    pub fn require_simulable(&self) -> Result<()> {
        if self.m[self.k()] >= 1.0 {
            Err(Error::Rsb(format!(
                "cascade simulation needs m_k < 1 (got {}); the Poisson sum diverges at m = 1",
                self.m[self.k()]
            )))
        } else {
            Ok(())
        }
    }

    /// Per-coordinate variances of the Gaussian columns `z_0..z_k`:
    /// `v_0 = xi'(q_1)` and `v_l = xi'(q_{l+1}) - xi'(q_l)`, so the column sums
    /// down to level `r` have variance `xi'(q_r)`.
    pub fn column_variances(&self, mix: &MixtureFunction) -> Vec<f64> {
        let k = self.k();
        (0..=k)
            .map(|l| {
                if l == 0 {
                    mix.xi_prime(self.q[1])
                } else {
                    mix.xi_prime(self.q[l + 1]) - mix.xi_prime(self.q[l])
                }
            })
            .collect()
    }

    /// The coupled-copy sequence: `n_l = m_l / 2` for `l < r`, `n_l = m_l` otherwise.
    pub fn halved_below(&self, r: usize) -> Result<RsbParams> {
        if r == 0 || r > self.k() {
            return Err(Error::Domain(format!("r = {r} outside 1..={}", self.k())));
        }
        let m: Vec<f64> = (1..=self.k())
            .map(|l| if l < r { self.m[l] / 2.0 } else { self.m[l] })
            .collect();
        RsbParams::new(&m, self.q_interior())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mixed() -> MixtureFunction {
        MixtureFunction::new(&[(2, 1.0), (4, 0.5)]).unwrap()
    }

    #[test]
    fn sk_values() {
        let sk = MixtureFunction::sk(1.0).unwrap();
        assert_abs_diff_eq!(sk.xi(0.5), 0.125, epsilon = 1e-15);
        assert_eq!(sk.xi(0.0), 0.0);
        assert_eq!(mixed().xi(0.0), 0.0);
        assert_abs_diff_eq!(sk.theta(1.0), 0.5, epsilon = 1e-15);
        assert_eq!(sk.theta(0.0), 0.0);
        assert_eq!(mixed().theta(0.0), 0.0);
    }

    #[test]
    fn xi_prime_matches_central_difference() {
        let mix = mixed();
        let h = 1e-5;
        let fd = (mix.xi(0.3 + h) - mix.xi(0.3 - h)) / (2.0 * h);
        assert_abs_diff_eq!(mix.xi_prime(0.3), fd, epsilon = 1e-8);
        let fd2 = (mix.xi_prime(0.3 + h) - mix.xi_prime(0.3 - h)) / (2.0 * h);
        assert_abs_diff_eq!(mix.xi_second(0.3), fd2, epsilon = 1e-8);
    }

    #[test]
    fn theta_of_pure_quartic() {
        // xi = x^4 / 2, so theta = (p - 1) xi = 3 x^4 / 2
        let mix = MixtureFunction::new(&[(4, 1.0)]).unwrap();
        let x: f64 = 0.5;
        let independent = 3.0 * 0.5 * x.powi(4);
        assert_abs_diff_eq!(mix.theta(x), independent, epsilon = 1e-15);
        assert_abs_diff_eq!(mix.theta(x), 0.09375, epsilon = 1e-15);
    }

    #[test]
    fn delta_examples() {
        let sk = MixtureFunction::sk(1.0).unwrap();
        assert_abs_diff_eq!(mixed().delta(0.37, 0.37), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sk.delta(0.2, 0.6), (0.2f64 - 0.6).powi(2) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sk.delta(0.2, 0.6), 0.08, epsilon = 1e-15);
        assert_abs_diff_eq!(sk.delta(-1.0, 1.0), 2.0, epsilon = 1e-15);
        assert!(sk.checked_delta(1.5, 0.0).is_err());
        assert!(sk.checked_theta(-1.0).is_ok());
    }

    #[test]
    fn delta_nonnegative_on_grid() {
        for mix in [mixed(), MixtureFunction::new(&[(1, 0.7), (2, 1.2), (6, 0.3)]).unwrap()] {
            for i in 0..=20 {
                let a = -1.0 + 0.1 * i as f64;
                for j in 0..=20 {
                    let b = -1.0 + 0.1 * j as f64;
                    assert!(mix.delta(a, b) >= -1e-12, "delta({a},{b})");
                }
                assert!(mix.delta(a, a).abs() <= 1e-12);
                assert!(mix.xi_second(a) >= 0.0);
            }
        }
    }

    #[test]
    fn theta_is_integral_of_s_xi_second() {
        // composite Simpson on [0, 1]
        let mix = mixed();
        let n = 2000;
        let h = 1.0 / n as f64;
        let f = |s: f64| s * mix.xi_second(s);
        let mut acc = f(0.0) + f(1.0);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        assert_abs_diff_eq!(acc * h / 3.0, mix.theta(1.0), epsilon = 1e-6);
    }

    #[test]
    fn rejects_bad_mixtures() {
        assert!(MixtureFunction::new(&[]).is_err());
        assert!(MixtureFunction::new(&[(0, 1.0)]).is_err());
        assert!(MixtureFunction::new(&[(3, 1.0)]).is_err());
        assert!(MixtureFunction::new(&[(2, 0.0)]).is_err());
        assert!(MixtureFunction::new(&[(2, 1.0), (2, 0.5)]).is_err());
        assert!(MixtureFunction::new(&[(1, 1.0), (2, 0.5)]).is_ok());
    }

    #[test]
    fn rsb_validation_and_variances() {
        let rsb = RsbParams::new(&[0.4, 0.8], &[0.3, 0.6]).unwrap();
        assert_eq!(rsb.k(), 2);
        assert_eq!(rsb.q(), &[0.0, 0.3, 0.6, 1.0]);
        let sk = MixtureFunction::sk(1.0).unwrap();
        let v = rsb.column_variances(&sk);
        assert_abs_diff_eq!(v.iter().sum::<f64>(), sk.xi_prime(1.0), epsilon = 1e-15);
        assert!(RsbParams::new(&[0.4, 0.4], &[0.3, 0.6]).is_err());
        assert!(RsbParams::new(&[0.4, 0.8], &[0.6, 0.3]).is_err());
        assert!(RsbParams::new(&[0.4, 1.2], &[0.3, 0.6]).is_err());
        assert!(RsbParams::new(&[0.4, 0.8], &[0.3, 1.0]).is_err());
        assert!(RsbParams::new(&[0.4, 1.0], &[0.3, 0.6]).unwrap().require_simulable().is_err());
        let n = rsb.halved_below(2).unwrap();
        assert_eq!(n.m_interior(), &[0.2, 0.8]);
        assert_eq!(rsb.halved_below(1).unwrap(), rsb);
    }

    #[test]
    fn overlap_of_bitmasks() {
        assert_eq!(overlap(4, 0b0000, 0b0000), 1.0);
        assert_eq!(overlap(4, 0b0000, 0b1111), -1.0);
        assert_eq!(overlap(4, 0b0011, 0b0001), 0.5);
    }

    proptest! {
        #[test]
        fn strictly_increasing_sequences_are_accepted(
            mut m in proptest::collection::vec(0.001f64..0.999, 1..5),
            mut q in proptest::collection::vec(0.001f64..0.999, 1..5),
        ) {
            let k = m.len().min(q.len());
            m.truncate(k);
            q.truncate(k);
            m.sort_by(f64::total_cmp);
            q.sort_by(f64::total_cmp);
            let strict = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
            let res = RsbParams::new(&m, &q);
            prop_assert_eq!(res.is_ok(), strict(&m) && strict(&q));
            m.reverse();
            if k > 1 && strict(&{ let mut s = m.clone(); s.reverse(); s }) {
                prop_assert!(RsbParams::new(&m, &q).is_err());
            }
        }
    }
}
