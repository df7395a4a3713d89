//! Backward recursion `X_{l-1} = m_l^{-1} log E_l exp(m_l X_l)` by nested
//! Gauss–Hermite quadrature.
//!
//! Two instances live here. The site recursion starts from
//! `log 2 cosh(x + h)` and gives the per-site value at `t = 0` and the k-RSB
//! bound. The mark recursion works on scalar node marks of a cascade and is
//! the quadrature side of the cascade identities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{PairFunctional, PathFunctional};
use crate::mixture::{MixtureFunction, RsbParams};
use crate::quadrature::{log_2cosh, log_sum_exp, NormalRule, QuadratureSpec};

/// Tolerance on the change under node doubling for `converged = true`.
pub const CONVERGENCE_TOL: f64 = 1e-7;

/// A function of the cumulative field at one level of the recursion.
pub type LevelFunction<'a> = Box<dyn Fn(f64) -> f64 + Sync + 'a>;

/// `x -> m^{-1} log E exp(m g(x + z))` with `z ~ N(0, variance)`.
///
/// `m = 0` is the plain expectation `E g(x + z)` and `variance = 0` returns `g`.
pub fn smoothing_step<'a>(
    g: LevelFunction<'a>,
    m: f64,
    variance: f64,
    rule: &'a NormalRule,
) -> Result<LevelFunction<'a>> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Domain(format!("smoothing exponent m = {m} outside [0, 1]")));
    }
    if !(variance >= 0.0) {
        return Err(Error::Domain(format!("variance {variance} is negative")));
    }
    if variance == 0.0 {
        return Ok(g);
    }
    let sd = variance.sqrt();
    Ok(if m == 0.0 {
        Box::new(move |x| rule.expect(sd, |z| g(x + z)))
    } else {
        Box::new(move |x| rule.log_expect_exp(sd, |z| m * g(x + z)) / m)
    })
}

/// Output of the site recursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionResult {
    /// Per-site value of the recursion root.
    pub phi0: f64,
    /// Column variances `v_0..v_k`.
    pub variances: Vec<f64>,
    /// `g_l` for `l = 1..=k+1`, tabulated as `(x, g_l(x))` on the quadrature
    /// nodes of the field accumulated above level `l`.
    pub level_functions: Vec<Vec<(f64, f64)>>,
    pub quad_nodes: usize,
    /// `|phi0(2n nodes) - phi0(n nodes)|` when a convergence check ran.
    pub refinement_change: Option<f64>,
    pub converged: Option<bool>,
}

fn site_chain<'a>(rsb: &RsbParams, variances: &[f64], h: f64, rule: &'a NormalRule) -> Result<LevelFunction<'a>> {
    let k = rsb.k();
    let mut g: LevelFunction<'a> = Box::new(move |x| log_2cosh(x + h));
    for l in (1..=k).rev() {
        g = smoothing_step(g, rsb.m()[l], variances[l], rule)?;
    }
    Ok(g)
}

/// Root value only, no tables; the optimizer's inner loop.
pub fn phi0_value(rsb: &RsbParams, mix: &MixtureFunction, h: f64, rule: &NormalRule) -> Result<f64> {
    let variances = rsb.column_variances(mix);
    let g1 = site_chain(rsb, &variances, h, rule)?;
    Ok(rule.expect(variances[0].sqrt(), g1))
}

/// Per-site value of the recursion at `t = 0` where all sites decouple.
pub fn phi0(rsb: &RsbParams, mix: &MixtureFunction, h: f64, quad: &QuadratureSpec) -> Result<RecursionResult> {
    quad.validate(rsb.k() + 1)?;
    let rule = NormalRule::new(quad.nodes_per_level)?;
    let variances = rsb.column_variances(mix);
    let value = phi0_value(rsb, mix, h, &rule)?;

    let k = rsb.k();
    let mut level_functions = Vec::with_capacity(k + 1);
    for l in 1..=k + 1 {
        let above: f64 = variances[..l].iter().sum();
        let mut g: LevelFunction = Box::new(move |x| log_2cosh(x + h));
        for j in (l..=k).rev() {
            g = smoothing_step(g, rsb.m()[j], variances[j], &rule)?;
        }
        let sd = above.sqrt();
        level_functions.push(rule.nodes.iter().map(|&z| (sd * z, g(sd * z))).collect());
    }

    let (refinement_change, converged) = if quad.convergence_check {
        let fine = NormalRule::new(quad.nodes_per_level * 2)?;
        let change = (phi0_value(rsb, mix, h, &fine)? - value).abs();
        (Some(change), Some(change < CONVERGENCE_TOL))
    } else {
        (None, None)
    };
    Ok(RecursionResult {
        phi0: value,
        variances,
        level_functions,
        quad_nodes: quad.nodes_per_level,
        refinement_change,
        converged,
    })
}

/// `B = phi0 - theta(1)/2 + 1/2 sum_r (m_r - m_{r-1}) theta(q_r)` for any
/// admissible sequences.
pub fn bound_value(rsb: &RsbParams, mix: &MixtureFunction, h: f64, rule: &NormalRule) -> Result<f64> {
    Ok(phi0_value(rsb, mix, h, rule)? + bound_correction(rsb, mix))
}

/// The `theta` part of the bound.
pub fn bound_correction(rsb: &RsbParams, mix: &MixtureFunction) -> f64 {
    let m = rsb.m();
    let q = rsb.q();
    let sum: f64 = (1..=rsb.k()).map(|r| (m[r] - m[r - 1]) * mix.theta(q[r])).sum();
    -0.5 * mix.theta(1.0) + 0.5 * sum
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub phi0: f64,
    pub bound: f64,
    pub quad_nodes: usize,
    pub converged: Option<bool>,
}

/// The k-RSB upper bound on the free energy; needs `m_k = 1`.
pub fn guerra_bound(rsb: &RsbParams, mix: &MixtureFunction, h: f64, quad: &QuadratureSpec) -> Result<BoundResult> {
    if rsb.m()[rsb.k()] != 1.0 {
        return Err(Error::Rsb(format!(
            "the bound is defined at m_k = 1 (got m_k = {})",
            rsb.m()[rsb.k()]
        )));
    }
    let res = phi0(rsb, mix, h, quad)?;
    Ok(BoundResult {
        phi0: res.phi0,
        bound: res.phi0 + bound_correction(rsb, mix),
        quad_nodes: res.quad_nodes,
        converged: res.converged,
    })
}

/// The recursion over scalar Gaussian node marks `g_l ~ N(0, sd_l^2)`.
pub struct MarkRecursion<'a> {
    /// `m_0..m_k`.
    m: &'a [f64],
    /// Mark standard deviations for levels `1..=k`.
    sd: &'a [f64],
    rule: NormalRule,
    x: &'a PathFunctional,
}

impl<'a> MarkRecursion<'a> {
    pub fn new(rsb: &'a RsbParams, mark_sd: &'a [f64], x: &'a PathFunctional, quad: &QuadratureSpec) -> Result<Self> {
        if mark_sd.len() != rsb.k() {
            return Err(Error::Domain(format!(
                "{} mark deviations for a depth-{} cascade",
                mark_sd.len(),
                rsb.k()
            )));
        }
        x.validate(mark_sd)?;
        quad.validate(rsb.k())?;
        Ok(MarkRecursion {
            m: rsb.m(),
            sd: mark_sd,
            rule: NormalRule::new(quad.nodes_per_level)?,
            x,
        })
    }

    fn k(&self) -> usize {
        self.sd.len()
    }

    /// `(X_l, F_l)` at the node with marks `prefix`, where
    /// `F_l = E[prod_{j > l} W_j * y | prefix]`.
    fn walk(&self, prefix: &mut Vec<f64>, y: &dyn Fn(&[f64]) -> f64) -> (f64, f64) {
        let l = prefix.len();
        if l == self.k() {
            return (self.x.eval(prefix), y(prefix));
        }
        let m = self.m[l + 1];
        let sd = self.sd[l];
        let mut xs = Vec::with_capacity(self.rule.len());
        let mut fs = Vec::with_capacity(self.rule.len());
        for &z in &self.rule.nodes {
            prefix.push(sd * z);
            let (x, f) = self.walk(prefix, y);
            prefix.pop();
            xs.push(x);
            fs.push(f);
        }
        self.combine(m, &xs, &fs)
    }

    fn combine(&self, m: f64, xs: &[f64], fs: &[f64]) -> (f64, f64) {
        let terms: Vec<f64> = self.rule.log_weights.iter().zip(xs).map(|(lw, x)| lw + m * x).collect();
        let x_here = log_sum_exp(&terms) / m;
        let f_here = terms
            .iter()
            .zip(fs)
            .map(|(t, f)| (t - m * x_here).exp() * f)
            .sum();
        (x_here, f_here)
    }

    /// The root value `X_0`.
    pub fn x0(&self) -> f64 {
        self.walk(&mut Vec::new(), &|_| 0.0).0
    }

    /// `E prod_{l<=k} W_l Y` for a single-path observable.
    pub fn tilted_mean(&self, y: &PathFunctional) -> f64 {
        self.walk(&mut Vec::new(), &|p| y.eval(p)).1
    }

    /// `M_r = E prod_{l<r} W_{alpha^l} prod_{l>=r} W_{alpha^l} W_{beta^l} Y`
    /// for leaves with `alpha ^ beta = r`.
    pub fn restricted_mean(&self, y: &PairFunctional, r: usize) -> Result<f64> {
        if r == 0 || r > self.k() {
            return Err(Error::Domain(format!("r = {r} outside 1..={}", self.k())));
        }
        Ok(self.walk_pair(&mut Vec::new(), y, r).1)
    }

    fn walk_pair(&self, prefix: &mut Vec<f64>, y: &PairFunctional, r: usize) -> (f64, f64) {
        let l = prefix.len();
        if l == r - 1 {
            let (x, a) = self.walk(prefix, &|p| y.left.eval(p));
            let (_, b) = self.walk(prefix, &|p| y.right.eval(p));
            return (x, a * b);
        }
        let m = self.m[l + 1];
        let sd = self.sd[l];
        let mut xs = Vec::with_capacity(self.rule.len());
        let mut fs = Vec::with_capacity(self.rule.len());
        for &z in &self.rule.nodes {
            prefix.push(sd * z);
            let (x, f) = self.walk_pair(prefix, y, r);
            prefix.pop();
            xs.push(x);
            fs.push(f);
        }
        self.combine(m, &xs, &fs)
    }

    /// `E[exp(X) * f]` over the last mark given the first `k - 1` marks, and
    /// `E[exp(X)]`, both as `(log E e^X, E[e^X f] / E[e^X])`.
    pub fn last_level(&self, prefix: &[f64], f: Option<&PathFunctional>) -> (f64, f64) {
        let mut marks = prefix.to_vec();
        marks.push(0.0);
        let k = self.k();
        let sd = self.sd[k - 1];
        let mut terms = Vec::with_capacity(self.rule.len());
        let mut vals = Vec::with_capacity(self.rule.len());
        for (&z, &lw) in self.rule.nodes.iter().zip(&self.rule.log_weights) {
            marks[k - 1] = sd * z;
            terms.push(lw + self.x.eval(&marks));
            vals.push(f.map_or(1.0, |f| f.eval(&marks)));
        }
        let lse = log_sum_exp(&terms);
        let avg = terms.iter().zip(&vals).map(|(t, v)| (t - lse).exp() * v).sum();
        (lse, avg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rule() -> NormalRule {
        NormalRule::new(40).unwrap()
    }

    #[test]
    fn smoothing_zero_variance_is_identity() {
        let r = rule();
        let g = smoothing_step(Box::new(|x: f64| x.sin()), 0.5, 0.0, &r).unwrap();
        assert_eq!(g(0.3), 0.3f64.sin());
    }

    #[test]
    fn smoothing_linear_function() {
        // (1/m) log E e^{m (x + z)} = x + m v / 2
        let r = rule();
        for m in [0.0, 0.3, 1.0] {
            let g = smoothing_step(Box::new(|x| x), m, 0.7, &r).unwrap();
            assert_abs_diff_eq!(g(0.4), 0.4 + m * 0.7 / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn smoothing_log_cosh_at_m_one() {
        // E 2 cosh(x + z) = 2 e^{v/2} cosh x
        let r = rule();
        let v = 0.9;
        let g = smoothing_step(Box::new(log_2cosh), 1.0, v, &r).unwrap();
        assert_abs_diff_eq!(g(0.0), (2.0 * (v / 2.0).exp()).ln(), epsilon = 1e-10);
        assert_abs_diff_eq!(g(0.8), log_2cosh(0.8) + v / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn smoothing_is_monotone_in_m() {
        let r = rule();
        for i in 0..=20 {
            let x = -2.0 + 0.2 * i as f64;
            let vals: Vec<f64> = [0.0, 0.5, 1.0]
                .iter()
                .map(|&m| smoothing_step(Box::new(log_2cosh), m, 1.3, &r).unwrap()(x))
                .collect();
            assert!(vals[0] <= vals[1] + 1e-14 && vals[1] <= vals[2] + 1e-14, "{vals:?}");
        }
        assert!(smoothing_step(Box::new(log_2cosh), 1.5, 1.0, &r).is_err());
    }

    #[test]
    fn phi0_without_disorder() {
        let rsb = RsbParams::new(&[0.5, 1.0], &[0.3, 0.6]).unwrap();
        let res = phi0(&rsb, &MixtureFunction::zero(), 0.5, &QuadratureSpec::default()).unwrap();
        assert_abs_diff_eq!(res.phi0, log_2cosh(0.5), epsilon = 1e-12);
        assert_abs_diff_eq!(res.phi0, 0.813_261_687_518_222_8, epsilon = 1e-12);
        let b = guerra_bound(&rsb, &MixtureFunction::zero(), 0.5, &QuadratureSpec::default()).unwrap();
        assert_abs_diff_eq!(b.bound, log_2cosh(0.5), epsilon = 1e-12);
    }

    #[test]
    fn replica_symmetric_limit() {
        let beta: f64 = 0.6;
        let sk = MixtureFunction::sk(beta).unwrap();
        let rsb = RsbParams::new(&[1.0], &[1e-12]).unwrap();
        let quad = QuadratureSpec::default();
        let res = phi0(&rsb, &sk, 0.3, &quad).unwrap();
        assert_abs_diff_eq!(res.phi0, log_2cosh(0.3) + beta * beta / 2.0, epsilon = 1e-9);
        let b = guerra_bound(&rsb, &sk, 0.0, &quad).unwrap();
        assert_abs_diff_eq!(b.bound, 2f64.ln() + beta * beta / 4.0, epsilon = 1e-6);
        assert_abs_diff_eq!(b.bound, 0.7831, epsilon = 1e-4);
        assert!(guerra_bound(&RsbParams::new(&[0.9], &[0.5]).unwrap(), &sk, 0.0, &quad).is_err());
    }

    #[test]
    fn doubling_nodes_converges() {
        let sk = MixtureFunction::sk(1.5).unwrap();
        let rsb = RsbParams::new(&[0.4, 1.0], &[0.3, 0.7]).unwrap();
        let quad = QuadratureSpec {
            nodes_per_level: 40,
            convergence_check: true,
        };
        let res = phi0(&rsb, &sk, 0.3, &quad).unwrap();
        assert_eq!(res.converged, Some(true), "{:?}", res.refinement_change);
        assert_eq!(res.level_functions.len(), 3);
        // the last table is log 2 cosh(x + h) itself
        for &(x, g) in &res.level_functions[2] {
            assert_abs_diff_eq!(g, log_2cosh(x + 0.3), epsilon = 1e-12);
        }
    }

    #[test]
    fn mark_recursion_gaussian_closed_form() {
        // k = 1, X = g ~ N(0, s^2): X_0 = m s^2 / 2
        let rsb = RsbParams::new(&[0.4], &[0.5]).unwrap();
        let sd = [0.8];
        let x = PathFunctional::linear(&[1.0]);
        let rec = MarkRecursion::new(&rsb, &sd, &x, &QuadratureSpec::default()).unwrap();
        assert_abs_diff_eq!(rec.x0(), 0.4 * 0.64 / 2.0, epsilon = 1e-12);
        // W-weighted mean of Y = g is the tilted mean m s^2
        assert_abs_diff_eq!(rec.tilted_mean(&PathFunctional::linear(&[1.0])), 0.4 * 0.64, epsilon = 1e-12);
        assert_abs_diff_eq!(rec.tilted_mean(&PathFunctional::constant(1.0)), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mark_recursion_two_levels_linear() {
        // X = a1 g1 + a2 g2: X_1 = a1 g1 + m2 a2^2 s2^2 / 2, X_0 = m1 a1^2 s1^2 / 2 + m2 a2^2 s2^2 / 2
        let rsb = RsbParams::new(&[0.4, 0.8], &[0.3, 0.6]).unwrap();
        let sd = [0.7, 1.1];
        let x = PathFunctional::linear(&[1.0, 0.5]);
        let rec = MarkRecursion::new(&rsb, &sd, &x, &QuadratureSpec::default()).unwrap();
        let expected = 0.4 * 0.49 / 2.0 + 0.8 * 0.25 * 1.21 / 2.0;
        assert_abs_diff_eq!(rec.x0(), expected, epsilon = 1e-12);
        let one = PairFunctional::one();
        assert_abs_diff_eq!(rec.restricted_mean(&one, 1).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rec.restricted_mean(&one, 2).unwrap(), 1.0, epsilon = 1e-12);
        // under the tilt, g1 has mean m1 a1 s1^2; pairs split at r = 1 are independent
        let g1 = PairFunctional::product(PathFunctional::linear(&[1.0, 0.0]), PathFunctional::linear(&[1.0, 0.0]));
        let mean1 = 0.4 * 0.49;
        assert_abs_diff_eq!(rec.restricted_mean(&g1, 1).unwrap(), mean1 * mean1, epsilon = 1e-12);
        // at r = 2 they share g1: E' g1^2 = s1^2 + mean1^2
        assert_abs_diff_eq!(rec.restricted_mean(&g1, 2).unwrap(), 0.49 + mean1 * mean1, epsilon = 1e-12);
    }
}
