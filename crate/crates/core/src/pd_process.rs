//! Poisson–Dirichlet PD(m, 0) point processes and their invariance identities.
//!
//! Points of a Poisson process with intensity `x^{-1-m} dx` on `(0, inf)` are
//! produced in decreasing order from the arrival times `Gamma_n` of a
//! unit-rate Poisson stream: `u_n = (m Gamma_n)^{-1/m}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Estimate, EstimatePair, TruncatedEstimate};
use crate::par;
use crate::rng::{self, Seed, Stream};

/// Number of mark draws used by the mark-side oracles.
const MARK_POOL: usize = 200_000;
/// Batches used to attach a standard error to mark-side ratios.
const MARK_BATCHES: usize = 50;

/// First `n` arrival times of a unit-rate Poisson stream.
pub fn arrivals(n: usize, rng: &mut Stream) -> Vec<f64> {
    let mut t = 0.0;
    (0..n)
        .map(|_| {
            t += rng::exp1(rng);
            t
        })
        .collect()
}

/// `ln u_n = -(ln m + ln Gamma_n) / m`.
#[inline]
pub fn log_point(m: f64, gamma: f64) -> f64 {
    -(m.ln() + gamma.ln()) / m
}

/// `ln E[sum_{n > N} u_n | Gamma_N]`, the conditional mean of the mass beyond
/// the first `N` points: `m^{-1/m} Gamma_N^{1-1/m} / (1/m - 1)`.
pub fn log_tail_mass(m: f64, last_arrival: f64) -> f64 {
    -m.ln() / m + (1.0 - 1.0 / m) * last_arrival.ln() - (1.0 / m - 1.0).ln()
}

/// `ln Var[sum_{n > N} u_n | Gamma_N] = ln( m^{-2/m} Gamma_N^{1-2/m} / (2/m - 1) )`.
pub fn log_tail_variance(m: f64, last_arrival: f64) -> f64 {
    -2.0 * m.ln() / m + (1.0 - 2.0 / m) * last_arrival.ln() - (2.0 / m - 1.0).ln()
}

/// Ratios `u_n / u_1 = (Gamma_1 / Gamma_n)^{1/m}`; normalized statistics only
/// depend on these and they never overflow.
pub fn ratios(m: f64, gammas: &[f64]) -> Vec<f64> {
    let g1 = gammas[0].ln();
    gammas.iter().map(|g| ((g1 - g.ln()) / m).exp()).collect()
}

/// Relative truncated mass `E[tail | Gamma_N] / sum_{n<=N} u_n` from ratios.
fn relative_tail(m: f64, gammas: &[f64], ratio_sum: f64) -> f64 {
    let last = *gammas.last().unwrap();
    (log_tail_mass(m, last) - log_point(m, gammas[0])).exp() / ratio_sum
}

fn check_m(m: f64) -> Result<()> {
    if m > 0.0 && m < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "PD(m, 0) needs 0 < m < 1 (got {m}); at m = 1 the point sum diverges"
        )))
    }
}

fn check_n_max(n_max: usize) -> Result<()> {
    if n_max >= 10 {
        Ok(())
    } else {
        Err(Error::Domain(format!("n_max = {n_max} must be at least 10")))
    }
}

/// One truncated PD(m, 0) sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdRealization {
    pub m: f64,
    /// Decreasing points `u_1 > u_2 > ...`.
    pub u: Vec<f64>,
    /// `u_n / sum u` over the kept points.
    pub w: Vec<f64>,
    /// Conditional expected mass beyond the last point, relative to the kept mass.
    pub tail_bound: f64,
}

pub fn sample_pd(m: f64, n_max: usize, seed: Seed) -> Result<PdRealization> {
    check_m(m)?;
    check_n_max(n_max)?;
    let mut rng = seed.stream();
    Ok(realization_from(m, &arrivals(n_max, &mut rng)))
}

pub(crate) fn realization_from(m: f64, gammas: &[f64]) -> PdRealization {
    let r = ratios(m, gammas);
    let total: f64 = r.iter().sum();
    let scale = log_point(m, gammas[0]);
    PdRealization {
        m,
        u: r.iter().map(|x| (x.ln() + scale).exp()).collect(),
        w: r.iter().map(|x| x / total).collect(),
        tail_bound: relative_tail(m, gammas, total),
    }
}

/// Monte Carlo estimate of `E sum_n w_n^2`, whose exact value is `1 - m`.
///
/// The allowance is the first-order truncation bias `2 E[tail * sum w^2]`.
pub fn estimate_pair_sum(m: f64, n_max: usize, replicas: usize, seed: Seed) -> Result<TruncatedEstimate> {
    check_m(m)?;
    check_n_max(n_max)?;
    if replicas < 2 {
        return Err(Error::Domain("need at least two replicas".into()));
    }
    let base = seed.tagged("pair-sum");
    let per: Vec<(f64, f64)> = par::map_indexed(replicas, |i| {
        let mut rng = base.replica(i).stream();
        let g = arrivals(n_max, &mut rng);
        let r = ratios(m, &g);
        let s: f64 = r.iter().sum();
        let q: f64 = r.iter().map(|x| x * x).sum();
        let w2 = q / (s * s);
        (w2, 2.0 * relative_tail(m, &g, s) * w2)
    });
    let samples: Vec<f64> = per.iter().map(|p| p.0).collect();
    let allowance = per.iter().map(|p| p.1).sum::<f64>() / replicas as f64;
    Ok(TruncatedEstimate {
        estimate: Estimate::from_samples(&samples),
        allowance,
    })
}

/// Closed menu of i.i.d. mark laws `(X, Y)`, all with `X > 0` and finite
/// second moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MarkSpec {
    Constant { x: f64, y: f64 },
    /// `X = shift + exp(sigma Z1)`, `Y = rho Z1 + sqrt(1 - rho^2) Z2`.
    LogNormal { sigma: f64, shift: f64, rho: f64 },
    /// Finitely many `(x, y, probability)` atoms.
    Discrete { atoms: Vec<(f64, f64, f64)> },
}

impl MarkSpec {
    /// `X` uniform on `{x1, x2}` with `Y = X`.
    pub fn two_point(x1: f64, x2: f64) -> MarkSpec {
        MarkSpec::Discrete {
            atoms: vec![(x1, x1, 0.5), (x2, x2, 0.5)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::Domain(format!("mark family: {s}")));
        match self {
            MarkSpec::Constant { x, y } => {
                if !(*x > 0.0 && x.is_finite() && y.is_finite()) {
                    return bad("constant X must be positive and finite");
                }
            }
            MarkSpec::LogNormal { sigma, shift, rho } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) || !(*shift >= 0.0 && shift.is_finite()) {
                    return bad("log-normal needs sigma >= 0 and shift >= 0");
                }
                if !(rho.abs() <= 1.0) {
                    return bad("log-normal needs |rho| <= 1");
                }
            }
            MarkSpec::Discrete { atoms } => {
                if atoms.is_empty() {
                    return bad("discrete law has no atoms");
                }
                if atoms.iter().any(|a| !(a.0 > 0.0 && a.0.is_finite() && a.1.is_finite() && a.2 > 0.0)) {
                    return bad("discrete atoms need x > 0 and probability > 0");
                }
                let total: f64 = atoms.iter().map(|a| a.2).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad("discrete probabilities must sum to 1");
                }
            }
        }
        Ok(())
    }

    /// Infimum of the support of `X`.
    pub fn x_infimum(&self) -> f64 {
        match self {
            MarkSpec::Constant { x, .. } => *x,
            MarkSpec::LogNormal { shift, .. } => *shift,
            MarkSpec::Discrete { atoms } => atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn sample(&self, rng: &mut Stream) -> (f64, f64) {
        match self {
            MarkSpec::Constant { x, y } => (*x, *y),
            MarkSpec::LogNormal { sigma, shift, rho } => {
                let z1 = rng::normal(rng);
                let z2 = rng::normal(rng);
                (shift + (sigma * z1).exp(), rho * z1 + (1.0 - rho * rho).max(0.0).sqrt() * z2)
            }
            MarkSpec::Discrete { atoms } => {
                use rand::Rng;
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.2;
                    if u < acc {
                        return (a.0, a.1);
                    }
                }
                let last = atoms.last().unwrap();
                (last.0, last.1)
            }
        }
    }
}

/// Mark pool reweighted by `X^m / E X^m`, sampled by inverse CDF.
#[derive(Clone, Debug)]
pub struct TiltedSampler {
    pool: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
    /// Monte Carlo estimate of `E X^m`.
    pub moment: f64,
}

impl TiltedSampler {
    pub fn new(marks: &MarkSpec, m: f64, pool_size: usize, seed: Seed) -> TiltedSampler {
        let mut rng = seed.stream();
        let pool: Vec<(f64, f64)> = (0..pool_size).map(|_| marks.sample(&mut rng)).collect();
        let mut acc = 0.0;
        let cumulative = pool
            .iter()
            .map(|(x, _)| {
                acc += x.powf(m);
                acc
            })
            .collect();
        TiltedSampler {
            moment: acc / pool_size as f64,
            pool,
            cumulative,
        }
    }

    /// One draw of `(X, Y)` under the tilted law.
    pub fn sample(&self, rng: &mut Stream) -> (f64, f64) {
        use rand::Rng;
        let total = *self.cumulative.last().unwrap();
        let target = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= target).min(self.pool.len() - 1);
        self.pool[i]
    }
}

/// Statistics used to compare two point processes in distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdStatistic {
    /// `sum_n w_n^2` of the normalized points.
    PairSum,
    /// Largest normalized point.
    TopWeight,
    /// `sum_n w_n Y_n`, the normalized-weight average of the marks.
    WeightedMark,
}

impl PdStatistic {
    pub fn name(self) -> &'static str {
        match self {
            PdStatistic::PairSum => "pair_sum",
            PdStatistic::TopWeight => "top_weight",
            PdStatistic::WeightedMark => "weighted_mark",
        }
    }

    pub fn parse(s: &str) -> Result<PdStatistic> {
        match s {
            "pair_sum" => Ok(PdStatistic::PairSum),
            "top_weight" => Ok(PdStatistic::TopWeight),
            "weighted_mark" => Ok(PdStatistic::WeightedMark),
            other => Err(Error::Unsupported(format!(
                "statistic `{other}` is not in the menu (pair_sum, top_weight, weighted_mark)"
            ))),
        }
    }

    fn evaluate(self, points: &[f64], marks: &[f64]) -> f64 {
        let total: f64 = points.iter().sum();
        match self {
            PdStatistic::PairSum => points.iter().map(|p| p * p).sum::<f64>() / (total * total),
            PdStatistic::TopWeight => points.iter().copied().fold(0.0, f64::max) / total,
            PdStatistic::WeightedMark => points.iter().zip(marks).map(|(p, y)| p * y).sum::<f64>() / total,
        }
    }
}

/// Compares a statistic of the marked process `(u_n X_n, Y_n)` with the same
/// statistic of `((E X^m)^{1/m} u_n, Y'_n)`, `Y'` drawn from the tilted law.
/// Both sides reuse the same `u` realization.
pub fn verify_invariance(
    m: f64,
    marks: &MarkSpec,
    statistic: PdStatistic,
    replicas: usize,
    n_max: usize,
    seed: Seed,
) -> Result<EstimatePair> {
    check_m(m)?;
    check_n_max(n_max)?;
    marks.validate()?;
    let base = seed.tagged("invariance");
    let tilted = TiltedSampler::new(marks, m, MARK_POOL, base.tagged("tilt-pool"));
    let scale = tilted.moment.powf(1.0 / m);
    let pool_mean_x = tilted.pool.iter().map(|p| p.0).sum::<f64>() / tilted.pool.len() as f64;
    let pool_abs_y = tilted.pool.iter().map(|p| p.1.abs()).sum::<f64>() / tilted.pool.len() as f64;
    let y_factor = match statistic {
        PdStatistic::WeightedMark => 1.0 + pool_abs_y,
        _ => 1.0,
    };

    let per: Vec<(f64, f64, f64)> = par::map_indexed(replicas, |i| {
        let rep = base.replica(i);
        let g = arrivals(n_max, &mut rep.tagged("points").stream());
        let r = ratios(m, &g);
        let mut mark_rng = rep.tagged("marks").stream();
        let mut tilt_rng = rep.tagged("tilted").stream();
        let mut pa = Vec::with_capacity(n_max);
        let mut ya = Vec::with_capacity(n_max);
        let mut pb = Vec::with_capacity(n_max);
        let mut yb = Vec::with_capacity(n_max);
        for &ri in &r {
            let (x, y) = marks.sample(&mut mark_rng);
            pa.push(ri * x);
            ya.push(y);
            pb.push(ri * scale);
            yb.push(tilted.sample(&mut tilt_rng).1);
        }
        let s: f64 = r.iter().sum();
        let sa: f64 = pa.iter().sum();
        let tail = relative_tail(m, &g, s);
        let tail_a = tail * s * pool_mean_x / sa;
        (
            statistic.evaluate(&pa, &ya),
            statistic.evaluate(&pb, &yb),
            2.0 * tail.max(tail_a) * y_factor,
        )
    });
    let lhs: Vec<f64> = per.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = per.iter().map(|p| p.1).collect();
    Ok(EstimatePair {
        lhs: Estimate::from_samples(&lhs),
        rhs: Estimate::from_samples(&rhs),
        allowance: per.iter().map(|p| p.2).sum::<f64>() / replicas as f64,
    })
}

/// The three mark identities for PD(m, 0), in order:
///
/// ```text
/// E sum u Y / sum u X                       = E X^{m-1} Y / E X^m
/// E sum u^2 Y^2 / (sum u X)^2               = (1 - m) E X^{m-2} Y^2 / E X^m
/// E sum_{n != n'} u u' Y Y' / (sum u X)^2   = m (E X^{m-1} Y / E X^m)^2
/// ```
///
/// Left sides come from PD realizations, right sides from plain Monte Carlo
/// over the mark law.
pub fn mark_moments(
    m: f64,
    marks: &MarkSpec,
    replicas: usize,
    n_max: usize,
    seed: Seed,
) -> Result<[EstimatePair; 3]> {
    check_m(m)?;
    check_n_max(n_max)?;
    marks.validate()?;
    if marks.x_infimum() < 1.0 {
        return Err(Error::Domain(format!(
            "the mark identities need X >= 1 (infimum of X is {})",
            marks.x_infimum()
        )));
    }
    let base = seed.tagged("mark-moments");
    let per: Vec<[f64; 4]> = par::map_indexed(replicas, |i| {
        let rep = base.replica(i);
        let g = arrivals(n_max, &mut rep.tagged("points").stream());
        let r = ratios(m, &g);
        let mut mark_rng = rep.tagged("marks").stream();
        let (mut sx, mut sy, mut sy2) = (0.0, 0.0, 0.0);
        for &ri in &r {
            let (x, y) = marks.sample(&mut mark_rng);
            sx += ri * x;
            sy += ri * y;
            sy2 += ri * ri * y * y;
        }
        let s: f64 = r.iter().sum();
        let tail = relative_tail(m, &g, s);
        [sy / sx, sy2 / (sx * sx), (sy * sy - sy2) / (sx * sx), tail]
    });
    let col = |j: usize| Estimate::from_samples(&per.iter().map(|p| p[j]).collect::<Vec<_>>());
    let tail = per.iter().map(|p| p[3]).sum::<f64>() / replicas as f64;

    // mark side, batched for a standard error
    let mark_seed = base.tagged("mark-oracle");
    let batch = MARK_POOL / MARK_BATCHES * 10;
    let rhs: Vec<[f64; 3]> = par::map_indexed(MARK_BATCHES, |b| {
        let mut rng = mark_seed.replica(b).stream();
        let (mut xm, mut xm1y, mut xm2y2) = (0.0, 0.0, 0.0);
        for _ in 0..batch {
            let (x, y) = marks.sample(&mut rng);
            let xp = x.powf(m);
            xm += xp;
            xm1y += xp / x * y;
            xm2y2 += xp / (x * x) * y * y;
        }
        let first = xm1y / xm;
        [first, (1.0 - m) * xm2y2 / xm, m * first * first]
    });
    let rcol = |j: usize| Estimate::from_samples(&rhs.iter().map(|p| p[j]).collect::<Vec<_>>());
    // relative tail mass enters each ratio at most twice; marks scale it by at most |Y|/X
    let allowance = 2.0 * tail;
    Ok([
        EstimatePair { lhs: col(0), rhs: rcol(0), allowance },
        EstimatePair { lhs: col(1), rhs: rcol(1), allowance },
        EstimatePair { lhs: col(2), rhs: rcol(2), allowance },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realization_invariants() {
        for (i, m) in [0.2, 0.5, 0.8].into_iter().enumerate() {
            let pd = sample_pd(m, 100, Seed::new(i as u64)).unwrap();
            assert!(pd.u.windows(2).all(|w| w[0] > w[1]));
            assert!(pd.u.iter().all(|&u| u > 0.0));
            assert!((pd.w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(pd.tail_bound >= 0.0);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let a = sample_pd(0.5, 100, Seed::new(42)).unwrap();
        let b = sample_pd(0.5, 100, Seed::new(42)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_pd(0.5, 100, Seed::new(43)).unwrap());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(sample_pd(1.0, 100, Seed::new(0)).is_err());
        assert!(sample_pd(0.0, 100, Seed::new(0)).is_err());
        assert!(sample_pd(0.5, 5, Seed::new(0)).is_err());
        assert!(PdStatistic::parse("variance").is_err());
        let lognormal = MarkSpec::LogNormal { sigma: 0.5, shift: 0.0, rho: 0.0 };
        assert!(mark_moments(0.5, &lognormal, 10, 100, Seed::new(0)).is_err());
    }

    #[test]
    fn first_point_median() {
        // u_1 = (m E)^{-1/m}, E ~ Exp(1), so median(u_1) = (m ln 2)^{-1/m}
        let m = 0.5;
        let n = 10_000;
        let mut u1: Vec<f64> = (0..n)
            .map(|i| sample_pd(m, 100, Seed::new(9).replica(i)).unwrap().u[0])
            .collect();
        u1.sort_by(f64::total_cmp);
        let target = (m * 2f64.ln()).powf(-1.0 / m);
        // order-statistic SE of the empirical median: the fraction of samples
        // below the target should be 1/2 within 3 * sqrt(1/(4n))
        let below = u1.iter().filter(|&&x| x < target).count() as f64 / n as f64;
        assert!((below - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "fraction below = {below}");
    }

    #[test]
    fn pair_sum_matches_one_minus_m() {
        for (m, n_max) in [(0.3, 1000), (0.5, 1000)] {
            let e = estimate_pair_sum(m, n_max, 2000, Seed::new(3)).unwrap();
            let err = (e.estimate.mean - (1.0 - m)).abs();
            assert!(err <= 3.0 * e.estimate.std_error + e.allowance, "m={m}: {e:?}");
        }
    }

    #[test]
    fn doubling_truncation_moves_estimate_within_allowance() {
        let a = estimate_pair_sum(0.5, 500, 500, Seed::new(5)).unwrap();
        let b = estimate_pair_sum(0.5, 1000, 500, Seed::new(5)).unwrap();
        assert!((a.estimate.mean - b.estimate.mean).abs() <= a.allowance, "{a:?} {b:?}");
    }

    #[test]
    fn constant_marks_give_identical_sides() {
        let marks = MarkSpec::Constant { x: 2.5, y: 1.0 };
        for stat in [PdStatistic::PairSum, PdStatistic::TopWeight, PdStatistic::WeightedMark] {
            let p = verify_invariance(0.5, &marks, stat, 50, 100, Seed::new(1)).unwrap();
            assert!((p.lhs.mean - p.rhs.mean).abs() < 1e-12, "{stat:?}: {p:?}");
        }
    }

    #[test]
    fn tilted_two_point_frequency() {
        let marks = MarkSpec::two_point(1.0, 2.0);
        let m = 0.5;
        let tilted = TiltedSampler::new(&marks, m, MARK_POOL, Seed::new(11));
        let target = 2f64.sqrt() / (1.0 + 2f64.sqrt());
        let n = 20_000;
        let mut rng = Seed::new(12).stream();
        let hits = (0..n).filter(|_| tilted.sample(&mut rng).0 == 2.0).count() as f64 / n as f64;
        let se = (target * (1.0 - target) / n as f64).sqrt();
        assert!((hits - target).abs() < 3.0 * se + 0.005, "{hits} vs {target}");
        // E X^m for the two-point law
        let exact = 0.5 * (1.0 + 2f64.sqrt());
        assert!((tilted.moment - exact).abs() < 0.01);
    }

    #[test]
    fn trivial_marks_reduce_to_pair_sum() {
        let marks = MarkSpec::Constant { x: 1.0, y: 1.0 };
        let m = 0.4;
        let [a, b, c] = mark_moments(m, &marks, 1000, 1000, Seed::new(2)).unwrap();
        assert!((a.lhs.mean - 1.0).abs() < 1e-12 && (a.rhs.mean - 1.0).abs() < 1e-12);
        assert!((b.rhs.mean - (1.0 - m)).abs() < 1e-12);
        assert!((c.rhs.mean - m).abs() < 1e-12);
        assert!(b.check("b", 3.0).pass, "{b:?}");
        assert!(c.check("c", 3.0).pass, "{c:?}");
    }

    #[test]
    fn constant_two_gives_one_half() {
        let marks = MarkSpec::Constant { x: 2.0, y: 1.0 };
        let [a, _, _] = mark_moments(0.5, &marks, 1000, 200, Seed::new(4)).unwrap();
        assert!((a.lhs.mean - 0.5).abs() < 1e-12);
        assert!((a.rhs.mean - 0.5).abs() < 1e-12);
    }
}
