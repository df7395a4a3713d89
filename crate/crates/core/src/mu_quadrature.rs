//! The coupled-copy measure `mu_r` by tensor quadrature, for tiny `N`.
//!
//! Columns of the field at levels `0..r` are shared by the two copies and
//! independent from level `r` on. The Hamiltonian's parity coefficients are
//! integrated by the same rule; the constant coefficient is dropped since it
//! cancels from every weight and Gibbs average.
//!
//! Two routes are computed on one grid:
//! * W: single-copy level densities, with the two-copy Gibbs average split
//!   into Walsh characters so each copy is integrated on its own below `r`;
//! * V: the full coupled recursion using the halved-below-`r` sequence.
//!
//! They are algebraically identical on the grid, so their gap is rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolation::OverlapKernel;
use crate::mixture::{MixtureFunction, RsbParams};
use crate::quadrature::{log_sum_exp, NormalRule, QuadratureSpec, MAX_TENSOR_POINTS};
use crate::sk_model::{coefficient_variance, walsh_hadamard, MAX_POWER};

pub const MAX_SITES: usize = 2;
pub const MAX_DEPTH: usize = 2;
/// Agreement required between the two routes.
pub const ROUTE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuReport {
    pub n: usize,
    pub r: usize,
    pub t: f64,
    pub nodes_per_dim: usize,
    /// Integration dimensions of the coupled grid.
    pub dimensions: usize,
    pub w_route: f64,
    pub v_route: f64,
    /// `mu_r(1)` by the W route.
    pub normalization: f64,
    pub route_gap: f64,
    /// `|G_0 - 2 F_0|`: coupled root value against twice the single-copy one.
    pub root_gap: f64,
}

impl MuReport {
    pub fn routes_agree(&self) -> bool {
        self.route_gap <= ROUTE_TOLERANCE
            && self.root_gap <= ROUTE_TOLERANCE
            && (self.normalization - 1.0).abs() <= ROUTE_TOLERANCE
    }
}

/// One grid point of a level column in `R^N`: offsets and log weight.
type Point = (Vec<f64>, f64);

fn tensor(rule: &NormalRule, sds: &[f64]) -> Vec<Point> {
    let mut out: Vec<Point> = vec![(Vec::new(), 0.0)];
    for &sd in sds {
        out = out
            .into_iter()
            .flat_map(|(x, lw)| {
                rule.nodes.iter().zip(&rule.log_weights).map(move |(z, w)| {
                    let mut y = x.clone();
                    y.push(sd * z);
                    (y, lw + w)
                })
            })
            .collect();
    }
    out
}

struct Grid<'a> {
    n: usize,
    k: usize,
    r: usize,
    t: f64,
    m: &'a [f64],
    halved: &'a [f64],
    /// Per level, points of the column.
    levels: Vec<Vec<Point>>,
    /// `sqrt(t) H(sigma) + h sum sigma` for each Hamiltonian grid point.
    hamiltonians: Vec<(Vec<f64>, f64)>,
    /// Walsh coefficients of the kernel over `2^N`.
    kernel_hat: Vec<f64>,
    one_hat: Vec<f64>,
}

fn add(x: &[f64], g: &[f64]) -> Vec<f64> {
    x.iter().zip(g).map(|(a, b)| a + b).collect()
}

impl Grid<'_> {
    /// `log Z` and Walsh transform of the Gibbs probabilities.
    fn leaf(&self, base: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        let a = (1.0 - self.t).sqrt();
        let lw: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(s, b)| {
                b + a * x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| if s >> i & 1 == 1 { -v } else { *v })
                    .sum::<f64>()
            })
            .collect();
        let log_z = log_sum_exp(&lw);
        let mut p: Vec<f64> = lw.iter().map(|v| (v - log_z).exp()).collect();
        walsh_hadamard(&mut p);
        (log_z, p)
    }

    fn pair(&self, hat: &[f64], a: &[f64], c: &[f64]) -> f64 {
        hat.iter().zip(a).zip(c).map(|((g, a), c)| g * a * c).sum::<f64>() / hat.len() as f64
    }

    /// Tilt a list of child values by `exp(m F')` and return `(F, weights)`.
    fn tilt(&self, m: f64, lw: &[f64], f: &[f64]) -> (f64, Vec<f64>) {
        let terms: Vec<f64> = lw.iter().zip(f).map(|(w, v)| w + m * v).collect();
        let lse = log_sum_exp(&terms);
        (lse / m, terms.iter().map(|x| (x - lse).exp()).collect())
    }

    /// Levels `l..=k` of one copy: `(F_l, E[prod W <chi_S>])`.
    fn copy_part(&self, l: usize, base: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        if l > self.k {
            return self.leaf(base, x);
        }
        let pts = &self.levels[l];
        let kids: Vec<(f64, Vec<f64>)> = pts.iter().map(|(g, _)| self.copy_part(l + 1, base, &add(x, g))).collect();
        let lw: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let f: Vec<f64> = kids.iter().map(|k| k.0).collect();
        let (value, w) = self.tilt(self.m[l], &lw, &f);
        let mut acc = vec![0.0; kids[0].1.len()];
        for (wi, (_, t)) in w.iter().zip(&kids) {
            acc.iter_mut().zip(t).for_each(|(a, v)| *a += wi * v);
        }
        (value, acc)
    }

    /// Shared levels `l..r`: `(F_l, E[prod W <f>], same for f = 1)`.
    fn shared_part(&self, l: usize, base: &[f64], x: &[f64]) -> (f64, f64, f64) {
        if l == self.r {
            let (value, t) = self.copy_part(l, base, x);
            return (value, self.pair(&self.kernel_hat, &t, &t), self.pair(&self.one_hat, &t, &t));
        }
        let pts = &self.levels[l];
        let kids: Vec<(f64, f64, f64)> = pts.iter().map(|(g, _)| self.shared_part(l + 1, base, &add(x, g))).collect();
        let lw: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let (f, w) = if l == 0 {
            let w: Vec<f64> = lw.iter().map(|v| v.exp()).collect();
            (w.iter().zip(&kids).map(|(w, k)| w * k.0).sum(), w)
        } else {
            self.tilt(self.m[l], &lw, &kids.iter().map(|k| k.0).collect::<Vec<_>>())
        };
        let u = w.iter().zip(&kids).map(|(w, k)| w * k.1).sum();
        let one = w.iter().zip(&kids).map(|(w, k)| w * k.2).sum();
        (f, u, one)
    }

    /// Coupled levels `l..=k`: `(G_l, E[prod V <f>])`.
    fn coupled(&self, l: usize, base: &[f64], x1: &[f64], x2: &[f64]) -> (f64, f64) {
        if l > self.k {
            let (z1, p1) = self.leaf(base, x1);
            let (z2, p2) = self.leaf(base, x2);
            return (z1 + z2, self.pair(&self.kernel_hat, &p1, &p2));
        }
        let pts = &self.levels[l];
        let mut lw = Vec::new();
        let mut kids = Vec::new();
        if l >= self.r {
            for (g1, w1) in pts {
                let y1 = add(x1, g1);
                for (g2, w2) in pts {
                    lw.push(w1 + w2);
                    kids.push(self.coupled(l + 1, base, &y1, &add(x2, g2)));
                }
            }
        } else {
            for (g, w) in pts {
                lw.push(*w);
                kids.push(self.coupled(l + 1, base, &add(x1, g), &add(x2, g)));
            }
        }
        if l == 0 {
            let w: Vec<f64> = lw.iter().map(|v| v.exp()).collect();
            return (
                w.iter().zip(&kids).map(|(w, k)| w * k.0).sum(),
                w.iter().zip(&kids).map(|(w, k)| w * k.1).sum(),
            );
        }
        let (value, w) = self.tilt(self.halved[l], &lw, &kids.iter().map(|k| k.0).collect::<Vec<_>>());
        (value, w.iter().zip(&kids).map(|(w, k)| w * k.1).sum())
    }
}

/// `mu_r(f)` for `f` a kernel of `R_12`, by both routes.
#[allow(clippy::too_many_arguments)]
pub fn mu_r_quadrature(
    n: usize,
    mix: &MixtureFunction,
    rsb: &RsbParams,
    h: f64,
    t: f64,
    r: usize,
    kernel: OverlapKernel,
    quad: &QuadratureSpec,
) -> Result<MuReport> {
    let k = rsb.k();
    if n == 0 || n > MAX_SITES {
        return Err(Error::Budget(format!("N = {n} outside 1..={MAX_SITES} for quadrature")));
    }
    if k == 0 || k > MAX_DEPTH {
        return Err(Error::Budget(format!("k = {k} outside 1..={MAX_DEPTH} for quadrature")));
    }
    if r == 0 || r > k {
        return Err(Error::Domain(format!("r = {r} outside 1..={k}")));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
    }
    if mix.max_power() > MAX_POWER {
        return Err(Error::Unsupported(format!("p above {MAX_POWER}")));
    }
    let size = 1usize << n;
    let coefficient_sd: Vec<(usize, f64)> = (1..size)
        .map(|s| (s, coefficient_variance(mix, n, (s as u32).count_ones() as usize).sqrt()))
        .filter(|&(_, sd)| sd > 0.0 && t > 0.0)
        .collect();
    let dimensions = coefficient_sd.len() + n * r + 2 * n * (k + 1 - r);
    let fit = MAX_TENSOR_POINTS.powf(1.0 / dimensions as f64).floor() as usize;
    let nodes = quad.nodes_per_level.min(fit);
    if nodes < 2 {
        return Err(Error::Budget(format!("{dimensions} dimensions leave fewer than 2 nodes each")));
    }
    let rule = NormalRule::new(nodes)?;

    let variances = rsb.column_variances(mix);
    let levels = variances.iter().map(|v| tensor(&rule, &vec![v.sqrt(); n])).collect();
    let spins: Vec<f64> = (0..size).map(|s| h * (n as f64 - 2.0 * s.count_ones() as f64)).collect();
    let sds: Vec<f64> = coefficient_sd.iter().map(|c| c.1).collect();
    let hamiltonians = tensor(&rule, &sds)
        .into_iter()
        .map(|(j, lw)| {
            let mut values = vec![0.0; size];
            for ((s, _), v) in coefficient_sd.iter().zip(&j) {
                values[*s] = *v;
            }
            walsh_hadamard(&mut values);
            let base = values.iter().zip(&spins).map(|(v, b)| t.sqrt() * v + b).collect();
            (base, lw.exp())
        })
        .collect();
    let mut kernel_hat = kernel.table(mix, n);
    walsh_hadamard(&mut kernel_hat);
    let mut one_hat = OverlapKernel::One.table(mix, n);
    walsh_hadamard(&mut one_hat);
    let halved = rsb.halved_below(r)?;
    let grid = Grid {
        n,
        k,
        r,
        t,
        m: rsb.m(),
        halved: halved.m(),
        levels,
        hamiltonians,
        kernel_hat,
        one_hat,
    };
    let zero = vec![0.0; grid.n];
    let (mut w_route, mut v_route, mut normalization, mut root_gap) = (0.0, 0.0, 0.0, 0.0f64);
    for (base, weight) in &grid.hamiltonians {
        let (f0, u, one) = grid.shared_part(0, base, &zero);
        let (g0, y) = grid.coupled(0, base, &zero, &zero);
        w_route += weight * u;
        normalization += weight * one;
        v_route += weight * y;
        root_gap = root_gap.max((g0 - 2.0 * f0).abs());
    }
    Ok(MuReport {
        n,
        r,
        t,
        nodes_per_dim: nodes,
        dimensions,
        w_route,
        v_route,
        normalization,
        route_gap: (w_route - v_route).abs(),
        root_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::DEFAULT_SIGMAS;
    use crate::interpolation::{coupled_average, InterpolationSetup};
    use crate::rng::Seed;
    use approx::assert_abs_diff_eq;

    fn rsb() -> RsbParams {
        RsbParams::new(&[0.4, 0.95], &[0.3, 0.7]).unwrap()
    }

    #[test]
    fn routes_agree_and_normalize() {
        let mix = MixtureFunction::new(&[(1, 0.4), (2, 0.9)]).unwrap();
        for (n, r, t) in [(1, 1, 0.0), (1, 2, 0.6), (2, 1, 0.3), (2, 2, 1.0)] {
            let q = rsb().q()[r];
            let rep = mu_r_quadrature(n, &mix, &rsb(), 0.2, t, r, OverlapKernel::ErrorDensity { q }, &QuadratureSpec::with_nodes(6))
                .unwrap();
            assert!(rep.routes_agree(), "{rep:?}");
        }
    }

    #[test]
    fn free_spins_have_closed_form() {
        // no disorder: the copies decouple and <R> = tanh(h)^2
        let rep = mu_r_quadrature(
            1,
            &MixtureFunction::zero(),
            &rsb(),
            0.7,
            0.4,
            1,
            OverlapKernel::Overlap,
            &QuadratureSpec::with_nodes(8),
        )
        .unwrap();
        assert_abs_diff_eq!(rep.w_route, 0.7f64.tanh().powi(2), epsilon = 1e-12);
    }

    #[test]
    fn rejects_out_of_budget() {
        let mix = MixtureFunction::sk(1.0).unwrap();
        let q = QuadratureSpec::default();
        assert!(mu_r_quadrature(3, &mix, &rsb(), 0.0, 0.5, 1, OverlapKernel::One, &q).is_err());
        assert!(mu_r_quadrature(1, &mix, &rsb(), 0.0, 0.5, 3, OverlapKernel::One, &q).is_err());
        assert!(mu_r_quadrature(1, &mix, &rsb(), 0.0, 1.5, 1, OverlapKernel::One, &q).is_err());
    }

    #[test]
    fn matches_coupled_cascade_at_one_site() {
        let mix = MixtureFunction::new(&[(1, 0.5), (2, 1.0)]).unwrap();
        let setup = InterpolationSetup { n: 1, mixture: mix.clone(), rsb: rsb(), b: 100, h: 0.3 };
        for r in 1..=2 {
            let quad = mu_r_quadrature(1, &mix, &rsb(), 0.3, 0.5, r, OverlapKernel::Overlap, &QuadratureSpec::with_nodes(16))
                .unwrap();
            let mc = coupled_average(&setup, 0.5, r, OverlapKernel::Overlap, 1500, Seed::new(9)).unwrap();
            let tol = DEFAULT_SIGMAS * mc.estimate.std_error + mc.allowance;
            assert!((quad.w_route - mc.estimate.mean).abs() <= tol, "r={r} {quad:?} {mc:?}");
        }
    }
}
