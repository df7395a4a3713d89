//! Minimization of the k-RSB bound over `(m, q)` with `m_k = 1`.
//!
//! Both sequences are written as cumulative sums of a softmax of free
//! logits (last logit pinned at 0), so every simplex vertex is a strictly
//! increasing sequence inside `(0, 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{MixtureFunction, RsbParams};
use crate::quadrature::{NormalRule, QuadratureSpec};
use crate::recursion::{bound_value, guerra_bound};

pub const MAX_DEPTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tolerance: f64,
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 2000,
            f_tolerance: 1e-12,
            initial_step: 0.7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub params: RsbParams,
    pub bound: f64,
    pub phi0: f64,
    /// Best value reached from each starting point.
    pub restart_values: Vec<f64>,
    pub evaluations: usize,
    /// False if the best restart hit `max_iterations`.
    pub converged: bool,
}

/// Strictly increasing values in `(0, 1)` from `n` logits plus a pinned 0.
fn cumulative_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(0.0, f64::max);
    let e: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total = e.iter().sum::<f64>() + (-max).exp();
    let mut acc = 0.0;
    e.iter()
        .map(|x| {
            acc += x / total;
            acc
        })
        .collect()
}

/// Inverse of `cumulative_softmax` for strictly increasing values in `(0, 1)`.
fn logits_of(values: &[f64]) -> Vec<f64> {
    let last = 1.0 - values.last().copied().unwrap_or(0.0);
    let mut prev = 0.0;
    values
        .iter()
        .map(|&v| {
            let d = v - prev;
            prev = v;
            (d / last).ln()
        })
        .collect()
}

struct Layout {
    k: usize,
}

impl Layout {
    fn decode(&self, x: &[f64]) -> Option<RsbParams> {
        let mut m = cumulative_softmax(&x[..self.k - 1]);
        m.push(1.0);
        let q = cumulative_softmax(&x[self.k - 1..]);
        RsbParams::new(&m, &q).ok()
    }

    fn encode(&self, p: &RsbParams) -> Vec<f64> {
        let mut x = logits_of(&p.m_interior()[..self.k - 1]);
        x.extend(logits_of(p.q_interior()));
        x
    }

    /// Profiles `q_r = (r / (k + 1))^gamma`, `m_r = (r / k)^gamma`.
    fn profile(&self, gamma: f64) -> RsbParams {
        let k = self.k;
        let m: Vec<f64> = (1..=k).map(|r| (r as f64 / k as f64).powf(gamma)).collect();
        let q: Vec<f64> = (1..=k).map(|r| (r as f64 / (k + 1) as f64).powf(gamma)).collect();
        RsbParams::new(&m, &q).expect("profiles are strictly increasing")
    }
}

/// Depth-`k - 1` parameters as a limit point of depth `k`: the new last level
/// has `m_{k-1} -> 1` and `q_k -> 1`, which leaves the bound unchanged.
fn embed(lower: &RsbParams) -> RsbParams {
    let mut m = lower.m_interior().to_vec();
    let last = m.len() - 1;
    m[last] = 1.0 - 1e-7;
    m.push(1.0);
    let mut q = lower.q_interior().to_vec();
    q.push(1.0 - 1e-9);
    RsbParams::new(&m, &q).expect("embedding keeps strict ordering")
}

struct Simplex {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

/// Plain Nelder–Mead (reflection 1, expansion 2, contraction and shrink 1/2).
fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    start: &[f64],
    cfg: &OptimizerConfig,
    evaluations: &mut usize,
) -> (Vec<f64>, f64, bool) {
    let n = start.len();
    let mut eval = |x: &[f64]| {
        *evaluations += 1;
        f(x)
    };
    let mut s = Simplex {
        points: vec![start.to_vec()],
        values: vec![eval(start)],
    };
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += cfg.initial_step;
        s.values.push(eval(&p));
        s.points.push(p);
    }
    for _ in 0..cfg.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| s.values[a].total_cmp(&s.values[b]).then(a.cmp(&b)));
        s.points = order.iter().map(|&i| s.points[i].clone()).collect();
        s.values = order.iter().map(|&i| s.values[i]).collect();
        if s.values[n] - s.values[0] <= cfg.f_tolerance {
            return (s.points[0].clone(), s.values[0], true);
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| s.points[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&s.points[n]).map(|(c, w)| c + t * (c - w)).collect()
        };
        let reflected = along(1.0);
        let fr = eval(&reflected);
        if fr < s.values[0] {
            let expanded = along(2.0);
            let fe = eval(&expanded);
            if fe < fr {
                s.points[n] = expanded;
                s.values[n] = fe;
            } else {
                s.points[n] = reflected;
                s.values[n] = fr;
            }
        } else if fr < s.values[n - 1] {
            s.points[n] = reflected;
            s.values[n] = fr;
        } else {
            let (contracted, fc) = if fr < s.values[n] {
                let c = along(0.5);
                let v = eval(&c);
                (c, v.min(fr))
            } else {
                let c = along(-0.5);
                let v = eval(&c);
                (c, v)
            };
            if fc < s.values[n].min(fr) {
                s.points[n] = contracted;
                s.values[n] = fc;
            } else {
                let best = s.points[0].clone();
                for i in 1..=n {
                    let p: Vec<f64> = best.iter().zip(&s.points[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    s.values[i] = eval(&p);
                    s.points[i] = p;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| s.values[a].total_cmp(&s.values[b])).unwrap();
    (s.points[best].clone(), s.values[best], false)
}

/// Minimizes the bound over depth-`k` parameters from five deterministic
/// starting points. For `k >= 2` one start is the embedded depth-`k-1`
/// optimum, so the result never exceeds the lower-depth value.
pub fn optimize_bound(
    mix: &MixtureFunction,
    h: f64,
    k: usize,
    quad: &QuadratureSpec,
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult> {
    if k == 0 || k > MAX_DEPTH {
        return Err(Error::Domain(format!("optimization depth k = {k} outside 1..={MAX_DEPTH}")));
    }
    quad.validate(k + 1)?;
    let rule = NormalRule::new(quad.nodes_per_level)?;
    let layout = Layout { k };

    let mut starts: Vec<RsbParams> = Vec::with_capacity(5);
    let mut evaluations = 0;
    if k >= 2 {
        let lower = optimize_bound(mix, h, k - 1, quad, cfg)?;
        evaluations += lower.evaluations;
        starts.push(embed(&lower.params));
    }
    for gamma in [1.0, 0.5, 2.0, 0.25, 4.0] {
        if starts.len() == 5 {
            break;
        }
        starts.push(layout.profile(gamma));
    }

    let mut objective = |x: &[f64]| match layout.decode(x) {
        Some(p) => bound_value(&p, mix, h, &rule).unwrap_or(f64::INFINITY),
        None => f64::INFINITY,
    };
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut restart_values = Vec::with_capacity(starts.len());
    for start in &starts {
        let (x, v, ok) = nelder_mead(&mut objective, &layout.encode(start), cfg, &mut evaluations);
        restart_values.push(v);
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((x, v, ok));
        }
    }
    let (x, _, converged) = best.expect("at least one restart");
    let params = layout.decode(&x).ok_or_else(|| Error::Rsb("optimizer left the admissible set".into()))?;
    let exact = guerra_bound(&params, mix, h, &QuadratureSpec { convergence_check: false, ..*quad })?;
    Ok(OptimizeResult {
        params,
        bound: exact.bound,
        phi0: exact.phi0,
        restart_values,
        evaluations,
        converged,
    })
}
