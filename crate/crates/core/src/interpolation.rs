//! The interpolating Gibbs system on configurations times cascade leaves:
//! `Gamma(sigma, alpha) ~ w_alpha exp(sqrt(t) H(sigma) + sqrt(1-t) s^alpha . sigma + h sum sigma)`.
//!
//! Everything is enumerated exactly per disorder draw. Each leaf parent also
//! carries its cascade remainder as one pseudo-leaf whose level-`k` column
//! is integrated out analytically: the remainder mass picks up the factor
//! `exp(N (1-t) v_k / 2)` and uses the field without its last column. With
//! this the derivative formula stays exact for the simulated system, pairs
//! inside one pseudo-leaf counting at level `k`.
//!
//! Pair averages of kernels that depend on `(alpha ^ beta, R_12)` go through
//! Walsh power spectra of the per-node configuration marginals.

use serde::{Deserialize, Serialize};

use crate::cascade::{build_cascade, Cascade, CascadeFields};
use crate::error::{Error, Result};
use crate::estimate::{Estimate, EstimatePair, TruncatedEstimate};
use crate::mixture::{MixtureFunction, RsbParams};
use crate::par;
use crate::quadrature::log_sum_exp;
use crate::rng::Seed;
use crate::sk_model::{sample_hamiltonian, walsh_hadamard, HamiltonianTable};

pub const MAX_SITES: usize = 8;
pub const MAX_LEAVES: usize = 10_000;
pub const MAX_STATES: usize = 2_500_000;
/// Coupled systems enumerate pairs of configurations.
pub const MAX_COUPLED_SITES: usize = 4;
pub const DEFAULT_DELTA: f64 = 0.02;

/// Model and cascade shared by all interpolation checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationSetup {
    pub n: usize,
    pub mixture: MixtureFunction,
    pub rsb: RsbParams,
    pub b: usize,
    pub h: f64,
}

impl InterpolationSetup {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_SITES {
            return Err(Error::Budget(format!("N = {} outside 1..={MAX_SITES}", self.n)));
        }
        self.rsb.require_simulable()?;
        let leaves = (self.b as f64).powi(self.rsb.k() as i32);
        if self.b < 2 || leaves > MAX_LEAVES as f64 {
            return Err(Error::Budget(format!("b^k = {leaves:.0} outside 2..={MAX_LEAVES}")));
        }
        let states = leaves * (1u64 << self.n) as f64;
        if states > MAX_STATES as f64 {
            return Err(Error::Budget(format!("2^N b^k = {states:.0} exceeds {MAX_STATES}")));
        }
        Ok(())
    }

    fn validate_coupled(&self, r: usize) -> Result<()> {
        self.validate()?;
        if self.n > MAX_COUPLED_SITES {
            return Err(Error::Budget(format!("coupled systems need N <= {MAX_COUPLED_SITES}")));
        }
        if r == 0 || r > self.rsb.k() {
            return Err(Error::Domain(format!("r = {r} outside 1..={}", self.rsb.k())));
        }
        Ok(())
    }
}

fn check_t(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("t = {t} outside [0, 1]")))
    }
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas < 2 {
        return Err(Error::Domain("need at least two replicas".into()));
    }
    Ok(())
}

/// `sum_i x_i sigma_i` for a configuration mask.
#[inline]
fn signed_sum(x: &[f64], mask: usize) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| if mask >> i & 1 == 1 { -v } else { *v })
        .sum()
}

/// `R(sigma, sigma')` from `sigma xor sigma'`.
#[inline]
pub fn overlap_of_xor(n: usize, x: usize) -> f64 {
    1.0 - 2.0 * x.count_ones() as f64 / n as f64
}

/// One draw of everything random: Hamiltonian, cascade, fields.
#[derive(Clone, Debug)]
pub struct Disorder {
    pub hamiltonian: HamiltonianTable,
    pub cascade: Cascade,
    pub fields: CascadeFields,
    leaf_fields: Vec<f64>,
    parent_fields: Vec<f64>,
    last_variance: f64,
}

pub fn draw_disorder(setup: &InterpolationSetup, seed: Seed) -> Result<Disorder> {
    draw_with(setup, &setup.rsb, seed)
}

fn draw_with(setup: &InterpolationSetup, weights: &RsbParams, seed: Seed) -> Result<Disorder> {
    setup.validate()?;
    let hamiltonian = sample_hamiltonian(setup.n, &setup.mixture, seed.tagged("hamiltonian"))?;
    let cascade = build_cascade(weights, setup.b, seed.tagged("cascade"))?;
    let fields = CascadeFields::new(cascade.shape(), &setup.rsb, &setup.mixture, setup.n, seed.tagged("fields"))?;
    let (leaf_fields, parent_fields) = fields.all_fields();
    let last_variance = *setup.rsb.column_variances(&setup.mixture).last().unwrap();
    Ok(Disorder {
        hamiltonian,
        cascade,
        fields,
        leaf_fields,
        parent_fields,
        last_variance,
    })
}

impl Disorder {
    fn sites(&self) -> usize {
        self.hamiltonian.n
    }

    /// `sqrt(t) H(sigma) + h sum sigma` per configuration.
    fn base(&self, t: f64, h: f64) -> Vec<f64> {
        let n = self.sites();
        self.hamiltonian
            .values
            .iter()
            .enumerate()
            .map(|(s, v)| t.sqrt() * v + h * (n as f64 - 2.0 * s.count_ones() as f64))
            .collect()
    }

    /// Log weights, state major: leaves then pseudo-leaves, `2^N` each.
    fn log_weights(&self, t: f64, h: f64, fields: (&[f64], &[f64]), copies: f64) -> Vec<f64> {
        let n = self.sites();
        let size = 1usize << n;
        let base = self.base(t, h);
        let c = self.cascade.w_compensated();
        let rem = self.cascade.remainder();
        let a = (1.0 - t).sqrt();
        let pseudo = copies * n as f64 * (1.0 - t) * self.last_variance / 2.0;
        let mut out = Vec::with_capacity((c.len() + rem.len()) * size);
        for (j, w) in c.iter().enumerate() {
            let f = &fields.0[j * n..(j + 1) * n];
            let lw = w.ln();
            out.extend((0..size).map(|s| lw + base[s] + a * signed_sum(f, s)));
        }
        for (p, w) in rem.iter().enumerate() {
            let f = &fields.1[p * n..(p + 1) * n];
            let lw = w.ln() + pseudo;
            out.extend((0..size).map(|s| lw + base[s] + a * signed_sum(f, s)));
        }
        out
    }

    /// The Gibbs system at time `t`.
    pub fn system(&self, t: f64, h: f64) -> GibbsSystem {
        let n = self.sites();
        let size = 1usize << n;
        let shape = self.cascade.shape();
        let lw = self.log_weights(t, h, (&self.leaf_fields, &self.parent_fields), 1.0);
        let log_z = log_sum_exp(&lw);
        let weights: Vec<f64> = lw.iter().map(|x| (x - log_z).exp()).collect();

        let leaves = shape.leaves();
        let k = shape.k;
        // per-depth configuration marginals, node major
        let mut levels: Vec<Vec<f64>> = vec![Vec::new(); k + 1];
        levels[k] = weights[..leaves * size].to_vec();
        for d in (0..k).rev() {
            let nodes = shape.nodes_at(d);
            let mut acc = vec![0.0; nodes * size];
            for (j, row) in levels[d + 1].chunks(size).enumerate() {
                let dst = &mut acc[(j / shape.b) * size..(j / shape.b + 1) * size];
                dst.iter_mut().zip(row).for_each(|(a, x)| *a += x);
            }
            if d + 1 == k {
                for (p, row) in weights[leaves * size..].chunks(size).enumerate() {
                    let dst = &mut acc[p * size..(p + 1) * size];
                    dst.iter_mut().zip(row).for_each(|(a, x)| *a += x);
                }
            }
            levels[d] = acc;
        }
        let spectra = levels
            .iter()
            .map(|level| {
                let mut power = vec![0.0; size];
                let mut buf = vec![0.0; size];
                for row in level.chunks(size) {
                    buf.copy_from_slice(row);
                    walsh_hadamard(&mut buf);
                    power.iter_mut().zip(&buf).for_each(|(p, x)| *p += x * x);
                }
                power
            })
            .collect();
        GibbsSystem {
            n,
            t,
            k,
            weights,
            phi: log_z / n as f64,
            spectra,
        }
    }
}

/// Exact Gibbs weights of one disorder draw at one time.
#[derive(Clone, Debug)]
pub struct GibbsSystem {
    pub n: usize,
    pub t: f64,
    k: usize,
    /// Normalized, state major (leaves then pseudo-leaves), `2^N` per state.
    weights: Vec<f64>,
    phi: f64,
    /// Walsh power spectrum of the configuration marginals at each depth.
    spectra: Vec<Vec<f64>>,
}

pub fn build_system(setup: &InterpolationSetup, t: f64, seed: Seed) -> Result<GibbsSystem> {
    check_t(t)?;
    Ok(draw_disorder(setup, seed)?.system(t, setup.h))
}

impl GibbsSystem {
    /// `N^{-1} log` of the partition function.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Configuration marginal of one state (leaf index, or leaves + parent).
    pub fn state_row(&self, state: usize) -> &[f64] {
        let size = 1 << self.n;
        &self.weights[state * size..(state + 1) * size]
    }

    /// `sum_{x, y} A(x) A(y) g(x xor y)` summed over the nodes of `depth`.
    fn quadratic(&self, depth: usize, g_hat: &[f64]) -> f64 {
        let size = g_hat.len() as f64;
        self.spectra[depth].iter().zip(g_hat).map(|(p, g)| p * g).sum::<f64>() / size
    }

    /// `<kernel(alpha ^ beta, R_12)>` under the product of two copies.
    pub fn pair_average(&self, kernel: impl Fn(usize, f64) -> f64) -> f64 {
        let size = 1usize << self.n;
        let mut total = 0.0;
        for r in 1..=self.k + 1 {
            let mut g: Vec<f64> = (0..size).map(|x| kernel(r, overlap_of_xor(self.n, x))).collect();
            walsh_hadamard(&mut g);
            total += if r <= self.k {
                self.quadratic(r - 1, &g) - self.quadratic(r, &g)
            } else {
                self.quadratic(self.k, &g)
            };
        }
        total
    }

    /// `Gamma^{x2}{alpha ^ beta = r}` for `r = 1..=k+1`.
    pub fn overlap_masses(&self) -> Vec<f64> {
        (1..=self.k + 1).map(|r| self.pair_average(|s, _| if s == r { 1.0 } else { 0.0 })).collect()
    }
}

/// `phi(t)` over independent disorder draws.
pub fn phi_t(setup: &InterpolationSetup, t: f64, replicas: usize, seed: Seed) -> Result<TruncatedEstimate> {
    check_t(t)?;
    check_replicas(replicas)?;
    setup.validate()?;
    let base = seed.tagged("phi");
    let per = par::map_indexed(replicas, |i| {
        let d = draw_disorder(setup, base.replica(i)).expect("validated");
        (d.system(t, setup.h).phi(), d.cascade.allowance() / 2.0)
    });
    Ok(truncated(&per))
}

fn truncated(per: &[(f64, f64)]) -> TruncatedEstimate {
    TruncatedEstimate {
        estimate: Estimate::from_samples(&per.iter().map(|p| p.0).collect::<Vec<_>>()),
        allowance: per.iter().map(|p| p.1).sum::<f64>() / per.len() as f64,
    }
}

/// `phi(t)` on a grid, sharing disorder across grid points.
pub fn phi_series(setup: &InterpolationSetup, ts: &[f64], replicas: usize, seed: Seed) -> Result<Vec<Estimate>> {
    for &t in ts {
        check_t(t)?;
    }
    check_replicas(replicas)?;
    setup.validate()?;
    let base = seed.tagged("phi");
    let per = par::map_indexed(replicas, |i| {
        let d = draw_disorder(setup, base.replica(i)).expect("validated");
        ts.iter().map(|&t| d.system(t, setup.h).phi()).collect::<Vec<_>>()
    });
    Ok((0..ts.len())
        .map(|j| Estimate::from_samples(&per.iter().map(|p| p[j]).collect::<Vec<_>>()))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub t: f64,
    pub delta: f64,
    /// `(phi(t + delta) - phi(t - delta)) / (2 delta)` with common disorder.
    pub numeric: Estimate,
    /// `-theta(1) / 2`.
    pub theta_one_term: f64,
    /// `E <theta(q_{alpha ^ beta})> / 2`.
    pub overlap_term: Estimate,
    /// `-E <Delta(R_12, q_{alpha ^ beta})> / 2`.
    pub error_term: Estimate,
    /// Sum of the three terms.
    pub formula: Estimate,
    /// The formula with the error term dropped; never below `formula`.
    pub formula_without_error: Estimate,
    pub pair: EstimatePair,
}

/// Central difference of `phi` against the Gibbs-average formula for `phi'(t)`.
pub fn derivative_check(
    setup: &InterpolationSetup,
    t: f64,
    delta: f64,
    replicas: usize,
    seed: Seed,
) -> Result<DerivativeReport> {
    check_replicas(replicas)?;
    setup.validate()?;
    if !(delta > 0.0 && t - delta >= 0.0 && t + delta <= 1.0) {
        return Err(Error::Domain(format!("t = {t} must lie in [delta, 1 - delta] with delta = {delta} > 0")));
    }
    let mix = &setup.mixture;
    let q = setup.rsb.q().to_vec();
    let theta_one = -0.5 * mix.theta(1.0);
    let base = seed.tagged("derivative");
    let per = par::map_indexed(replicas, |i| {
        let d = draw_disorder(setup, base.replica(i)).expect("validated");
        let up = d.system(t + delta, setup.h).phi();
        let down = d.system(t - delta, setup.h).phi();
        let g = d.system(t, setup.h);
        let theta = 0.5 * g.pair_average(|r, _| mix.theta(q[r]));
        let err = -0.5 * g.pair_average(|r, x| mix.delta(x, q[r]));
        [(up - down) / (2.0 * delta), theta, err]
    });
    let column = |j: usize| Estimate::from_samples(&per.iter().map(|p| p[j]).collect::<Vec<_>>());
    let formula = Estimate::from_samples(&per.iter().map(|p| theta_one + p[1] + p[2]).collect::<Vec<_>>());
    let without = Estimate::from_samples(&per.iter().map(|p| theta_one + p[1]).collect::<Vec<_>>());
    let numeric = column(0);
    Ok(DerivativeReport {
        t,
        delta,
        numeric,
        theta_one_term: theta_one,
        overlap_term: column(1),
        error_term: column(2),
        formula,
        formula_without_error: without,
        pair: EstimatePair {
            lhs: numeric,
            rhs: formula,
            allowance: delta * delta,
        },
    })
}

/// `E Gamma^{x2}{alpha ^ beta = r}` for `r = 1..=k+1`.
pub fn gibbs_overlap_masses(
    setup: &InterpolationSetup,
    t: f64,
    replicas: usize,
    seed: Seed,
) -> Result<Vec<TruncatedEstimate>> {
    check_t(t)?;
    check_replicas(replicas)?;
    setup.validate()?;
    let base = seed.tagged("gibbs-overlap");
    let per = par::map_indexed(replicas, |i| {
        let d = draw_disorder(setup, base.replica(i)).expect("validated");
        (d.system(t, setup.h).overlap_masses(), d.cascade.allowance())
    });
    let allowance = per.iter().map(|p| p.1).sum::<f64>() / replicas as f64;
    Ok((0..=setup.rsb.k())
        .map(|r| TruncatedEstimate {
            estimate: Estimate::from_samples(&per.iter().map(|p| p.0[r]).collect::<Vec<_>>()),
            allowance,
        })
        .collect())
}

pub fn gibbs_overlap_mass(
    setup: &InterpolationSetup,
    t: f64,
    r: usize,
    replicas: usize,
    seed: Seed,
) -> Result<TruncatedEstimate> {
    if r == 0 || r > setup.rsb.k() + 1 {
        return Err(Error::Domain(format!("r = {r} outside 1..={}", setup.rsb.k() + 1)));
    }
    Ok(gibbs_overlap_masses(setup, t, replicas, seed)?[r - 1])
}

/// A kernel of the overlap of two configurations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OverlapKernel {
    One,
    /// `R_12`; at `N = 1` this is `sigma^1 sigma^2`.
    Overlap,
    /// `Delta(R_12, q)`.
    ErrorDensity { q: f64 },
}

impl OverlapKernel {
    pub fn eval(&self, mix: &MixtureFunction, r12: f64) -> f64 {
        match *self {
            OverlapKernel::One => 1.0,
            OverlapKernel::Overlap => r12,
            OverlapKernel::ErrorDensity { q } => mix.delta(r12, q),
        }
    }

    /// Values on `sigma xor sigma'` masks.
    pub fn table(&self, mix: &MixtureFunction, n: usize) -> Vec<f64> {
        (0..1usize << n).map(|x| self.eval(mix, overlap_of_xor(n, x))).collect()
    }

    /// Largest absolute value over the overlaps `N` sites can produce.
    pub fn sup(&self, mix: &MixtureFunction, n: usize) -> f64 {
        self.table(mix, n).iter().fold(0.0, |a, x| a.max(x.abs()))
    }
}

/// Two copies on one cascade with the halved-below-`r` weights; the copies
/// share field columns above depth `r`.
#[derive(Clone, Debug)]
pub struct CoupledGibbsSystem {
    pub n: usize,
    pub r: usize,
    /// Per state, copy-one weights including the cascade mass, and copy-two
    /// weights; the joint weight of `(sigma1, sigma2, alpha)` is their product.
    first: Vec<f64>,
    second: Vec<f64>,
    norm: f64,
}

pub fn build_coupled_system(setup: &InterpolationSetup, t: f64, r: usize, seed: Seed) -> Result<CoupledGibbsSystem> {
    check_t(t)?;
    setup.validate_coupled(r)?;
    let halved = setup.rsb.halved_below(r)?;
    let d = draw_with(setup, &halved, seed)?;
    let one = d.fields.coupled(r, 1).all_fields();
    let two = d.fields.coupled(r, 2).all_fields();
    let n = setup.n;
    let size = 1usize << n;
    let first = d.log_weights(t, setup.h, (&one.0, &one.1), 2.0);
    // the second copy carries no cascade mass: subtract it back out
    let masses: Vec<f64> = d
        .cascade
        .w_compensated()
        .iter()
        .chain(d.cascade.remainder())
        .map(|w| w.ln())
        .collect();
    let pseudo = 2.0 * n as f64 * (1.0 - t) * d.last_variance / 2.0;
    let leaves = d.cascade.shape().leaves();
    let mut second = d.log_weights(t, setup.h, (&two.0, &two.1), 2.0);
    for (j, row) in second.chunks_mut(size).enumerate() {
        let strip = masses[j] + if j >= leaves { pseudo } else { 0.0 };
        row.iter_mut().for_each(|x| *x -= strip);
    }
    let s1 = first.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s2 = second.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first: Vec<f64> = first.iter().map(|x| (x - s1).exp()).collect();
    let second: Vec<f64> = second.iter().map(|x| (x - s2).exp()).collect();
    let norm = first
        .chunks(size)
        .zip(second.chunks(size))
        .map(|(a, c)| a.iter().sum::<f64>() * c.iter().sum::<f64>())
        .sum();
    Ok(CoupledGibbsSystem { n, r, first, second, norm })
}

impl CoupledGibbsSystem {
    /// Sum of the normalized joint weights; 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        let size = 1usize << self.n;
        self.first
            .chunks(size)
            .zip(self.second.chunks(size))
            .map(|(a, c)| a.iter().sum::<f64>() * c.iter().sum::<f64>())
            .sum::<f64>()
            / self.norm
    }

    /// `<g(sigma1 xor sigma2)>_r` for a table over masks.
    pub fn average(&self, table: &[f64]) -> f64 {
        let size = 1usize << self.n;
        let mut g = table.to_vec();
        walsh_hadamard(&mut g);
        let mut a = vec![0.0; size];
        let mut c = vec![0.0; size];
        let mut total = 0.0;
        for (ra, rc) in self.first.chunks(size).zip(self.second.chunks(size)) {
            a.copy_from_slice(ra);
            c.copy_from_slice(rc);
            walsh_hadamard(&mut a);
            walsh_hadamard(&mut c);
            total += g.iter().zip(&a).zip(&c).map(|((g, a), c)| g * a * c).sum::<f64>();
        }
        total / size as f64 / self.norm
    }
}

/// `E <f>_r` over independent draws of the coupled system.
pub fn coupled_average(
    setup: &InterpolationSetup,
    t: f64,
    r: usize,
    kernel: OverlapKernel,
    replicas: usize,
    seed: Seed,
) -> Result<TruncatedEstimate> {
    check_t(t)?;
    check_replicas(replicas)?;
    setup.validate_coupled(r)?;
    let table = kernel.table(&setup.mixture, setup.n);
    let sup = kernel.sup(&setup.mixture, setup.n);
    let base = seed.tagged("coupled");
    let per = par::map_indexed(replicas, |i| {
        let s = base.replica(i);
        let sys = build_coupled_system(setup, t, r, s).expect("validated");
        let c = build_cascade(&setup.rsb.halved_below(r).expect("validated"), setup.b, s.tagged("cascade"))
            .expect("validated");
        (sys.average(&table), c.allowance() * sup)
    });
    Ok(truncated(&per))
}

/// `E <Delta(R_12, q_{alpha ^ beta}) 1{alpha ^ beta = r}>` under two copies of
/// `Gamma` against `(m_r - m_{r-1}) E <Delta(R_12, q_r)>_r` under the coupled
/// system, from independent draws.
pub fn error_term_check(
    setup: &InterpolationSetup,
    t: f64,
    r: usize,
    replicas: usize,
    seed: Seed,
) -> Result<EstimatePair> {
    check_t(t)?;
    check_replicas(replicas)?;
    setup.validate_coupled(r)?;
    let mix = &setup.mixture;
    let q = setup.rsb.q()[r];
    let kernel = OverlapKernel::ErrorDensity { q };
    let sup = kernel.sup(mix, setup.n);
    let base = seed.tagged("error-term");
    let lhs = par::map_indexed(replicas, |i| {
        let d = draw_disorder(setup, base.replica(i)).expect("validated");
        let g = d.system(t, setup.h);
        let v = g.pair_average(|s, x| if s == r { mix.delta(x, q) } else { 0.0 });
        (v, d.cascade.allowance() * sup)
    });
    let rhs = coupled_average(setup, t, r, kernel, replicas, seed)?;
    let m = setup.rsb.m();
    let scale = m[r] - m[r - 1];
    let lhs = truncated(&lhs);
    Ok(EstimatePair {
        lhs: lhs.estimate,
        rhs: Estimate {
            mean: scale * rhs.estimate.mean,
            std_error: scale * rhs.estimate.std_error,
            replicas: rhs.estimate.replicas,
        },
        allowance: lhs.allowance + scale * rhs.allowance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::DEFAULT_SIGMAS;
    use crate::quadrature::{log_2cosh, QuadratureSpec};
    use crate::recursion::phi0;
    use crate::sk_model::exact_free_energy;
    use approx::assert_abs_diff_eq;

    fn setup(beta: f64, n: usize, b: usize) -> InterpolationSetup {
        InterpolationSetup {
            n,
            mixture: MixtureFunction::sk(beta).unwrap(),
            rsb: RsbParams::new(&[0.4, 0.95], &[0.3, 0.7]).unwrap(),
            b,
            h: 0.3,
        }
    }

    #[test]
    fn budget_guards() {
        let mut s = setup(0.5, 9, 10);
        assert!(s.validate().is_err());
        s.n = 8;
        s.b = 101;
        assert!(s.validate().is_err());
        s.b = 10;
        assert!(s.validate().is_ok());
        assert!(build_coupled_system(&s, 0.5, 1, Seed::new(0)).is_err());
        assert!(build_system(&s, 1.5, Seed::new(0)).is_err());
    }

    #[test]
    fn normalization_and_endpoints() {
        let s = setup(0.8, 3, 12);
        let d = draw_disorder(&s, Seed::new(4)).unwrap();
        let size = 8;
        for t in [0.0, 0.37, 1.0] {
            let g = d.system(t, s.h);
            assert_abs_diff_eq!(g.total_mass(), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(g.overlap_masses().iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        }
        // t = 1: the state marginal is the cascade and phi is the free energy
        let g = d.system(1.0, s.h);
        for (j, w) in d.cascade.w_compensated().iter().enumerate() {
            assert_abs_diff_eq!(g.state_row(j).iter().sum::<f64>(), *w, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(g.phi(), d.hamiltonian.free_energy(s.h), epsilon = 1e-12);
        // t = 0: given the leaf, sites are independent with fields s_i + h
        let g = d.system(0.0, s.h);
        let field = d.fields.leaf_field(5);
        let row = g.state_row(5);
        let total: f64 = row.iter().sum();
        for (mask, w) in row.iter().enumerate() {
            let expected: f64 = (0..3)
                .map(|i| {
                    let x = field[i] + s.h;
                    let sign = if mask >> i & 1 == 1 { -1.0 } else { 1.0 };
                    (sign * x - log_2cosh(x)).exp()
                })
                .product();
            assert_abs_diff_eq!(w / total, expected, epsilon = 1e-12);
        }
        assert_eq!(row.len(), size);
    }

    #[test]
    fn spectral_pair_average_matches_brute_force() {
        let s = setup(0.9, 3, 4);
        let d = draw_disorder(&s, Seed::new(8)).unwrap();
        let g = d.system(0.4, s.h);
        let shape = d.cascade.shape();
        let leaves = shape.leaves();
        let states = leaves + shape.nodes_at(1);
        // parent of each state and a brute-force wedge that treats pseudo-leaves as diffuse
        let wedge = |a: usize, b: usize| -> usize {
            let node = |j: usize| if j < leaves { (j / shape.b, Some(j)) } else { (j - leaves, None) };
            let (pa, la) = node(a);
            let (pb, lb) = node(b);
            if pa != pb {
                1
            } else if la.is_some() && la == lb {
                3
            } else {
                2
            }
        };
        let kernel = |r: usize, x: f64| r as f64 + x * x - 0.3 * x;
        let mut brute = 0.0;
        for a in 0..states {
            for b in 0..states {
                for (x, wa) in g.state_row(a).iter().enumerate() {
                    for (y, wb) in g.state_row(b).iter().enumerate() {
                        brute += wa * wb * kernel(wedge(a, b), overlap_of_xor(3, x ^ y));
                    }
                }
            }
        }
        assert_abs_diff_eq!(g.pair_average(kernel), brute, epsilon = 1e-12);
    }

    #[test]
    fn disorder_free_phi_is_constant() {
        let mut s = setup(0.0, 3, 10);
        s.mixture = MixtureFunction::zero();
        for t in [0.0, 0.5, 1.0] {
            let e = phi_t(&s, t, 5, Seed::new(1)).unwrap();
            assert_abs_diff_eq!(e.estimate.mean, log_2cosh(s.h), epsilon = 1e-12);
        }
        let r = derivative_check(&s, 0.5, 0.02, 5, Seed::new(1)).unwrap();
        assert_abs_diff_eq!(r.numeric.mean, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.formula.mean, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn endpoints_match_oracles() {
        let s = setup(0.5, 4, 60);
        let start = phi_t(&s, 0.0, 600, Seed::new(2)).unwrap();
        let quad = phi0(&s.rsb, &s.mixture, s.h, &QuadratureSpec::default()).unwrap();
        let tol = DEFAULT_SIGMAS * start.estimate.std_error + start.allowance;
        assert!((start.estimate.mean - quad.phi0).abs() <= tol, "{start:?} vs {}", quad.phi0);
        let end = phi_t(&s, 1.0, 600, Seed::new(2)).unwrap();
        let exact = exact_free_energy(4, &s.mixture, s.h, 600, Seed::new(77)).unwrap();
        let pair = EstimatePair { lhs: end.estimate, rhs: exact.estimate, allowance: 0.0 };
        assert!(pair.check("phi(1)", DEFAULT_SIGMAS).pass, "{pair:?}");
    }

    #[test]
    fn derivative_formula() {
        let s = setup(0.5, 4, 40);
        let r = derivative_check(&s, 0.5, DEFAULT_DELTA, 400, Seed::new(3)).unwrap();
        assert!(r.pair.check("derivative", DEFAULT_SIGMAS).pass, "{r:?}");
        assert!(r.formula_without_error.mean >= r.formula.mean);
        assert!(r.error_term.mean <= 0.0);
    }

    #[test]
    fn coupled_system_normalizes_and_copies_share_upper_columns() {
        let s = setup(0.7, 2, 6);
        let c = build_coupled_system(&s, 0.3, 2, Seed::new(5)).unwrap();
        assert_abs_diff_eq!(c.total_mass(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c.average(&OverlapKernel::One.table(&s.mixture, 2)), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn error_terms_agree_without_disorder() {
        let mut s = setup(0.0, 3, 30);
        s.h = 0.0;
        s.mixture = MixtureFunction::zero();
        for r in 1..=2 {
            let p = error_term_check(&s, 0.5, r, 200, Seed::new(6)).unwrap();
            assert!(p.check("error-term", DEFAULT_SIGMAS).pass, "{r} {p:?}");
        }
    }

    #[test]
    fn error_terms_agree() {
        let s = setup(0.8, 3, 40);
        for r in 1..=2 {
            let p = error_term_check(&s, 0.5, r, 800, Seed::new(7)).unwrap();
            assert!(p.lhs.mean > 0.0);
            assert!(p.check("error-term", DEFAULT_SIGMAS).pass, "{r} {p:?}");
        }
    }
}
