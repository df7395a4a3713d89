//! Truncated Derrida–Ruelle cascades.
//!
//! Every node at depth `l - 1` carries the `b` largest points of its own
//! PD(m_l, 0) process; leaf weights are products along the path. The mass a
//! leaf parent loses by truncating its level-`k` process is put back as one
//! diffuse remainder carrying the conditional expected tail, so normalized
//! statistics are not biased by `b` when `m_k` is close to 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Estimate, EstimatePair, TruncatedEstimate};
use crate::functional::{PairFunctional, PathFunctional};
use crate::mixture::{MixtureFunction, RsbParams};
use crate::par;
use crate::pd_process::{arrivals, log_point, log_tail_mass, log_tail_variance};
use crate::quadrature::{log_sum_exp, QuadratureSpec};
use crate::recursion::MarkRecursion;
use crate::rng::{self, Seed};
use crate::tree::TreeShape;

pub const MAX_LEAVES: usize = 1_000_000;
/// Sites supported by field attachment.
pub const MAX_SITES: usize = 20;

/// Seeds of every node, depth by depth, matching `Seed::path` of the node path.
pub fn node_seeds(base: Seed, shape: TreeShape, max_depth: usize) -> Vec<Vec<Seed>> {
    let mut out = vec![vec![base]];
    for d in 1..=max_depth {
        let prev = &out[d - 1];
        let level = (0..shape.nodes_at(d))
            .map(|j| prev[j / shape.b].child((j % shape.b) as u64 + 1))
            .collect();
        out.push(level);
    }
    out
}

#[derive(Clone, Debug)]
pub struct Cascade {
    rsb: RsbParams,
    shape: TreeShape,
    /// `ln u` of the nodes at depth `d` in entry `d - 1`.
    log_u: Vec<Vec<f64>>,
    /// `ln E[truncated tail]` of the block owned by each depth-`d` node, entry `d`.
    log_tail: Vec<Vec<f64>>,
    log_v: Vec<f64>,
    /// `ln(v_parent * E tail)` per leaf parent.
    log_remainder: Vec<f64>,
    w: Vec<f64>,
    w_compensated: Vec<f64>,
    remainder: Vec<f64>,
    upper_tail: f64,
    leaf_residual: f64,
}

fn check_shape(rsb: &RsbParams, b: usize) -> Result<TreeShape> {
    rsb.require_simulable()?;
    if b < 2 {
        return Err(Error::Domain(format!("branching b = {b} must be at least 2")));
    }
    let leaves = (b as f64).powi(rsb.k() as i32);
    if leaves > MAX_LEAVES as f64 {
        return Err(Error::Budget(format!("b^k = {leaves:.0} leaves exceeds 1e6")));
    }
    Ok(TreeShape::new(b, rsb.k()))
}

/// Builds one cascade; deterministic in `(rsb, b, seed)`. The root block is
/// drawn from `seed.stream()`, so at `k = 1` the points equal
/// `sample_pd(m_1, b, seed)`.
pub fn build_cascade(rsb: &RsbParams, b: usize, seed: Seed) -> Result<Cascade> {
    let shape = check_shape(rsb, b)?;
    let k = shape.k;
    let seeds = node_seeds(seed, shape, k - 1);
    let mut log_u = Vec::with_capacity(k);
    let mut log_tail = Vec::with_capacity(k);
    let mut log_leaf_tail_var = Vec::new();
    for d in 1..=k {
        let m = rsb.m()[d];
        let parents = shape.nodes_at(d - 1);
        let mut level = Vec::with_capacity(parents * b);
        let mut tails = Vec::with_capacity(parents);
        for node in &seeds[d - 1][..parents] {
            let g = arrivals(b, &mut node.stream());
            level.extend(g.iter().map(|&x| log_point(m, x)));
            tails.push(log_tail_mass(m, g[b - 1]));
            if d == k {
                log_leaf_tail_var.push(log_tail_variance(m, g[b - 1]));
            }
        }
        log_u.push(level);
        log_tail.push(tails);
    }

    // path products
    let mut log_prefix: Vec<f64> = vec![0.0];
    for d in 1..k {
        log_prefix = (0..shape.nodes_at(d)).map(|j| log_prefix[j / b] + log_u[d - 1][j]).collect();
    }
    let log_v: Vec<f64> = (0..shape.leaves()).map(|a| log_prefix[a / b] + log_u[k - 1][a]).collect();
    let log_remainder: Vec<f64> = log_prefix.iter().zip(&log_tail[k - 1]).map(|(p, t)| p + t).collect();

    let shift = log_v.iter().chain(&log_remainder).copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_v.iter().map(|x| (x - shift).exp()).collect();
    let rem: Vec<f64> = log_remainder.iter().map(|x| (x - shift).exp()).collect();
    let raw_total: f64 = raw.iter().sum();
    let total = raw_total + rem.iter().sum::<f64>();
    let w = raw.iter().map(|x| x / raw_total).collect();
    let w_compensated: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let remainder: Vec<f64> = rem.iter().map(|x| x / total).collect();

    let levels = shape.level_sums(&w_compensated, &remainder);
    let mut upper_tail = 0.0;
    for d in 1..k {
        for p in 0..shape.nodes_at(d - 1) {
            let block = log_sum_exp(&log_u[d - 1][p * b..(p + 1) * b]);
            upper_tail += levels[d - 1][p] * (log_tail[d - 1][p] - block).exp();
        }
    }
    let mut leaf_residual = 0.0;
    for p in 0..shape.nodes_at(k - 1) {
        let block = log_sum_exp(&log_u[k - 1][p * b..(p + 1) * b]);
        let with_tail = log_sum_exp(&[block, log_tail[k - 1][p]]);
        leaf_residual += levels[k - 1][p] * (0.5 * log_leaf_tail_var[p] - with_tail).exp();
    }

    Ok(Cascade {
        rsb: rsb.clone(),
        shape,
        log_u,
        log_tail,
        log_v,
        log_remainder,
        w,
        w_compensated,
        remainder,
        upper_tail,
        leaf_residual,
    })
}

impl Cascade {
    pub fn rsb(&self) -> &RsbParams {
        &self.rsb
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn k(&self) -> usize {
        self.shape.k
    }

    /// `ln u` of the `b^depth` nodes at `depth`.
    pub fn log_u(&self, depth: usize) -> &[f64] {
        &self.log_u[depth - 1]
    }

    /// `ln v_alpha` per leaf.
    pub fn log_v(&self) -> &[f64] {
        &self.log_v
    }

    /// `ln` of the expected mass truncated from the level-`depth + 1` block of
    /// each depth-`depth` node.
    pub fn log_tail(&self, depth: usize) -> &[f64] {
        &self.log_tail[depth]
    }

    /// `ln(v_parent E tail)` per leaf parent.
    pub fn log_remainder(&self) -> &[f64] {
        &self.log_remainder
    }

    /// Normalized weights `v_alpha / sum v` over the kept leaves.
    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// Leaf weights normalized by kept mass plus remainders.
    pub fn w_compensated(&self) -> &[f64] {
        &self.w_compensated
    }

    /// Normalized remainder mass per leaf parent.
    pub fn remainder(&self) -> &[f64] {
        &self.remainder
    }

    /// `sum_p W_p tau_p` over truncated blocks above the leaves.
    pub fn upper_tail(&self) -> f64 {
        self.upper_tail
    }

    /// Weighted relative standard deviation of the leaf tails around their
    /// compensated mean.
    pub fn leaf_residual(&self) -> f64 {
        self.leaf_residual
    }

    /// Bound on the bias of normalized statistics bounded by 1.
    pub fn allowance(&self) -> f64 {
        2.0 * (self.upper_tail + self.leaf_residual)
    }

    /// `sum_{alpha ^ beta = r} w_alpha w_beta` for `r = 1..=k+1`.
    pub fn overlap_masses(&self) -> Vec<f64> {
        self.shape
            .pair_sums(&self.w_compensated, &self.remainder, &self.w_compensated, &self.remainder)
    }

    pub fn snapshot(&self) -> CascadeSnapshot {
        CascadeSnapshot {
            b: self.shape.b,
            m: self.rsb.m()[1..].to_vec(),
            leaves: (0..self.shape.leaves())
                .map(|a| LeafRecord {
                    path: self.shape.path(a, self.k()).iter().map(|x| x + 1).collect(),
                    log_v: self.log_v[a],
                    w: self.w[a],
                })
                .collect(),
        }
    }
}

/// Debug export of a built cascade; paths are one based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeSnapshot {
    pub b: usize,
    pub m: Vec<f64>,
    pub leaves: Vec<LeafRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafRecord {
    pub path: Vec<u32>,
    pub log_v: f64,
    pub w: f64,
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas < 2 {
        return Err(Error::Domain("need at least two replicas".into()));
    }
    Ok(())
}

/// `E sum_{alpha ^ beta = r} w_alpha w_beta` for every `r = 1..=k+1`.
pub fn overlap_masses(rsb: &RsbParams, b: usize, replicas: usize, seed: Seed) -> Result<Vec<TruncatedEstimate>> {
    check_shape(rsb, b)?;
    check_replicas(replicas)?;
    let base = seed.tagged("overlap");
    let per = par::map_indexed(replicas, |i| {
        let c = build_cascade(rsb, b, base.replica(i)).expect("validated");
        (c.overlap_masses(), c.allowance())
    });
    let allowance = per.iter().map(|p| p.1).sum::<f64>() / replicas as f64;
    Ok((0..=rsb.k())
        .map(|r| TruncatedEstimate {
            estimate: Estimate::from_samples(&per.iter().map(|p| p.0[r]).collect::<Vec<_>>()),
            allowance,
        })
        .collect())
}

pub fn overlap_mass(rsb: &RsbParams, b: usize, r: usize, replicas: usize, seed: Seed) -> Result<TruncatedEstimate> {
    if r == 0 || r > rsb.k() + 1 {
        return Err(Error::Domain(format!("r = {r} outside 1..={}", rsb.k() + 1)));
    }
    Ok(overlap_masses(rsb, b, replicas, seed)?[r - 1])
}

/// Exact overlap masses `m_r - m_{r-1}` and `1 - m_k`.
pub fn overlap_mass_reference(rsb: &RsbParams) -> Vec<f64> {
    let m = rsb.m();
    let mut out: Vec<f64> = (1..=rsb.k()).map(|r| m[r] - m[r - 1]).collect();
    out.push(1.0 - m[rsb.k()]);
    out
}

/// Gaussian columns `z` on the cascade nodes; leaf fields are path sums.
///
/// Nothing is stored: every column is regenerated from its node seed.
#[derive(Clone, Debug)]
pub struct CascadeFields {
    shape: TreeShape,
    n: usize,
    /// Column standard deviations, depth 0 (root) to k.
    sd: Vec<f64>,
    base: Seed,
    /// `(r, copy)`: columns at depth `>= r` belong to copy `copy` only.
    coupling: Option<(usize, u32)>,
}

pub fn attach_fields(cascade: &Cascade, mix: &MixtureFunction, n: usize, seed: Seed) -> Result<CascadeFields> {
    CascadeFields::new(cascade.shape(), cascade.rsb(), mix, n, seed)
}

impl CascadeFields {
    pub fn new(shape: TreeShape, rsb: &RsbParams, mix: &MixtureFunction, n: usize, seed: Seed) -> Result<Self> {
        if n == 0 || n > MAX_SITES {
            return Err(Error::Domain(format!("N = {n} outside 1..={MAX_SITES}")));
        }
        if rsb.k() != shape.k {
            return Err(Error::Domain("tree depth differs from k".into()));
        }
        Ok(CascadeFields {
            shape,
            n,
            sd: rsb.column_variances(mix).iter().map(|v| v.sqrt()).collect(),
            base: seed.tagged("field"),
            coupling: None,
        })
    }

    /// The same fields seen by copy `copy` of a pair that shares the columns
    /// above depth `r` and has independent columns from depth `r` on.
    pub fn coupled(&self, r: usize, copy: u32) -> CascadeFields {
        CascadeFields {
            coupling: Some((r, copy)),
            ..self.clone()
        }
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    fn column_seed(&self, depth: usize, node: usize) -> Seed {
        let path = self.shape.path(node, depth);
        match self.coupling {
            Some((r, copy)) if depth >= r => self.base.tagged("copy").child(copy as u64).path(&path),
            _ => self.base.path(&path),
        }
    }

    /// Column of the depth-`depth` node, `N` values.
    pub fn column(&self, depth: usize, node: usize) -> Vec<f64> {
        let sd = self.sd[depth];
        let mut rng = self.column_seed(depth, node).stream();
        (0..self.n).map(|_| sd * rng::normal(&mut rng)).collect()
    }

    fn sum_columns(&self, leaf: usize, depths: std::ops::Range<usize>) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for d in depths {
            let col = self.column(d, self.shape.ancestor(leaf, self.shape.k, d));
            s.iter_mut().zip(col).for_each(|(a, c)| *a += c);
        }
        s
    }

    /// `s^alpha`, all columns along the path including the root.
    pub fn leaf_field(&self, leaf: usize) -> Vec<f64> {
        self.sum_columns(leaf, 0..self.shape.k + 1)
    }

    /// Field of a leaf parent without the level-`k` column.
    pub fn partial_field(&self, parent: usize) -> Vec<f64> {
        let k = self.shape.k;
        let leaf = parent * self.shape.b;
        self.sum_columns(leaf, 0..k)
    }

    /// Fields of every leaf (row major, `N` per leaf) and of every leaf
    /// parent without the last column, generating each column once.
    pub fn all_fields(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let k = self.shape.k;
        let mut acc = self.column(0, 0);
        for d in 1..=k {
            let count = self.shape.nodes_at(d);
            let mut next = Vec::with_capacity(count * n);
            for j in 0..count {
                let col = self.column(d, j);
                let parent = &acc[(j / self.shape.b) * n..(j / self.shape.b + 1) * n];
                next.extend(parent.iter().zip(col).map(|(a, c)| a + c));
            }
            if d == k {
                return (next, acc);
            }
            acc = next;
        }
        unreachable!("k >= 1")
    }
}

/// `s_i^alpha s_j^beta` over independent disorder draws against the exact
/// covariance (`xi'(q_{alpha ^ beta})` on the diagonal, 0 off it).
#[allow(clippy::too_many_arguments)]
pub fn field_covariance(
    rsb: &RsbParams,
    mix: &MixtureFunction,
    b: usize,
    n: usize,
    leaves: (usize, usize),
    sites: (usize, usize),
    replicas: usize,
    seed: Seed,
) -> Result<EstimatePair> {
    let shape = check_shape(rsb, b)?;
    check_replicas(replicas)?;
    if leaves.0 >= shape.leaves() || leaves.1 >= shape.leaves() || sites.0 >= n || sites.1 >= n {
        return Err(Error::Domain("leaf or site index out of range".into()));
    }
    let samples = par::map_indexed(replicas, |i| {
        let f = CascadeFields::new(shape, rsb, mix, n, seed.replica(i)).expect("validated");
        f.leaf_field(leaves.0)[sites.0] * f.leaf_field(leaves.1)[sites.1]
    });
    let exact = if sites.0 == sites.1 {
        mix.xi_prime(rsb.q()[shape.wedge(leaves.0, leaves.1)])
    } else {
        0.0
    };
    Ok(EstimatePair {
        lhs: Estimate::from_samples(&samples),
        rhs: Estimate::exact(exact),
        allowance: 0.0,
    })
}

/// A cascade with an independent scalar Gaussian mark on every node.
#[derive(Clone, Debug)]
pub struct MarkedCascade {
    pub cascade: Cascade,
    /// Marks at depth `d` in entry `d - 1`.
    marks: Vec<Vec<f64>>,
}

impl MarkedCascade {
    /// Marks depend only on `(seed, node path)`.
    pub fn new(cascade: Cascade, mark_sd: &[f64], seed: Seed) -> Result<Self> {
        let shape = cascade.shape();
        if mark_sd.len() != shape.k {
            return Err(Error::Domain(format!("{} mark deviations for depth {}", mark_sd.len(), shape.k)));
        }
        let seeds = node_seeds(seed.tagged("marks"), shape, shape.k);
        let marks = (1..=shape.k)
            .map(|d| seeds[d].iter().map(|s| mark_sd[d - 1] * rng::normal(&mut s.stream())).collect())
            .collect();
        Ok(MarkedCascade { cascade, marks })
    }

    /// Marks along the path to a depth-`depth` node.
    pub fn path_marks(&self, node: usize, depth: usize) -> Vec<f64> {
        let shape = self.cascade.shape();
        (1..=depth).map(|d| self.marks[d - 1][shape.ancestor(node, depth, d)]).collect()
    }

    pub fn leaf_values(&self, f: &PathFunctional) -> Vec<f64> {
        let k = self.cascade.k();
        (0..self.cascade.shape().leaves()).map(|a| f.eval(&self.path_marks(a, k))).collect()
    }
}

/// Tilted leaf and remainder masses `w e^X` (unnormalized, scaled to avoid
/// overflow) and the tilt averages of the remainders under the last mark.
struct Tilted {
    /// `ln` of the common scale removed from `leaf` and `rem`.
    shift: f64,
    leaf: Vec<f64>,
    rem: Vec<f64>,
    prefixes: Vec<Vec<f64>>,
}

fn tilt(mc: &MarkedCascade, rec: &MarkRecursion, x: &PathFunctional) -> Tilted {
    let c = &mc.cascade;
    let k = c.k();
    let xs = mc.leaf_values(x);
    let prefixes: Vec<Vec<f64>> = (0..c.shape().nodes_at(k - 1)).map(|p| mc.path_marks(p, k - 1)).collect();
    let log_leaf: Vec<f64> = c.w_compensated().iter().zip(&xs).map(|(w, x)| w.ln() + x).collect();
    let log_rem: Vec<f64> = c
        .remainder()
        .iter()
        .zip(&prefixes)
        .map(|(r, p)| r.ln() + rec.last_level(p, None).0)
        .collect();
    let shift = log_leaf.iter().chain(&log_rem).copied().fold(f64::NEG_INFINITY, f64::max);
    Tilted {
        shift,
        leaf: log_leaf.iter().map(|x| (x - shift).exp()).collect(),
        rem: log_rem.iter().map(|x| (x - shift).exp()).collect(),
        prefixes,
    }
}

impl Tilted {
    fn total(&self) -> f64 {
        self.leaf.iter().sum::<f64>() + self.rem.iter().sum::<f64>()
    }

    /// Leaf and remainder masses multiplied by `f`, normalized by the total.
    fn weighted(&self, mc: &MarkedCascade, rec: &MarkRecursion, f: &PathFunctional) -> (Vec<f64>, Vec<f64>) {
        let z = self.total();
        let fs = mc.leaf_values(f);
        let leaf = self.leaf.iter().zip(&fs).map(|(a, f)| a * f / z).collect();
        let rem = self
            .rem
            .iter()
            .zip(&self.prefixes)
            .map(|(r, p)| r * rec.last_level(p, Some(f)).1 / z)
            .collect();
        (leaf, rem)
    }
}

/// Shared setup of the marked-cascade identities.
pub struct MarkedSetup<'a> {
    pub rsb: &'a RsbParams,
    pub b: usize,
    pub mark_sd: &'a [f64],
    pub quad: QuadratureSpec,
}

impl MarkedSetup<'_> {
    fn recursion<'x>(&'x self, x: &'x PathFunctional) -> Result<MarkRecursion<'x>> {
        check_shape(self.rsb, self.b)?;
        MarkRecursion::new(self.rsb, self.mark_sd, x, &self.quad)
    }

    fn replica(&self, seed: Seed) -> MarkedCascade {
        let c = build_cascade(self.rsb, self.b, seed).expect("validated");
        MarkedCascade::new(c, self.mark_sd, seed).expect("validated")
    }

    /// `E log sum_alpha w_alpha e^{X_alpha}` against the quadrature `X_0`.
    pub fn log_partition_identity(&self, x: &PathFunctional, replicas: usize, seed: Seed) -> Result<EstimatePair> {
        check_replicas(replicas)?;
        let rec = self.recursion(x)?;
        let base = seed.tagged("log-partition");
        let per = par::map_indexed(replicas, |i| {
            let mc = self.replica(base.replica(i));
            let t = tilt(&mc, &rec, x);
            (t.shift + t.total().ln(), mc.cascade.allowance() / 2.0)
        });
        let samples: Vec<f64> = per.iter().map(|p| p.0).collect();
        Ok(EstimatePair {
            lhs: Estimate::from_samples(&samples),
            rhs: Estimate::exact(rec.x0()),
            allowance: per.iter().map(|p| p.1).sum::<f64>() / replicas as f64,
        })
    }

    /// Unrestricted tilted average `E[sum v e^X Y / sum v e^X]` against
    /// `E prod W Y`.
    pub fn tilted_average(
        &self,
        x: &PathFunctional,
        y: &PathFunctional,
        replicas: usize,
        seed: Seed,
    ) -> Result<EstimatePair> {
        check_replicas(replicas)?;
        y.validate(self.mark_sd)?;
        let rec = self.recursion(x)?;
        let base = seed.tagged("tilted");
        let per = par::map_indexed(replicas, |i| {
            let mc = self.replica(base.replica(i));
            let t = tilt(&mc, &rec, x);
            let (leaf, rem) = t.weighted(&mc, &rec, y);
            (leaf.iter().sum::<f64>() + rem.iter().sum::<f64>(), mc.cascade.allowance())
        });
        let reference = rec.tilted_mean(y);
        Ok(pair_from(per, reference))
    }

    /// Restricted average over pairs with `alpha ^ beta = r` against
    /// `(m_r - m_{r-1}) M_r`.
    pub fn restricted_average(
        &self,
        x: &PathFunctional,
        y: &PairFunctional,
        r: usize,
        replicas: usize,
        seed: Seed,
    ) -> Result<EstimatePair> {
        check_replicas(replicas)?;
        y.left.validate(self.mark_sd)?;
        y.right.validate(self.mark_sd)?;
        let rec = self.recursion(x)?;
        let k = self.rsb.k();
        if r == 0 || r > k {
            return Err(Error::Domain(format!("restricted r = {r} outside 1..={k}")));
        }
        let base = seed.tagged("restricted");
        let per = par::map_indexed(replicas, |i| {
            let mc = self.replica(base.replica(i));
            let t = tilt(&mc, &rec, x);
            let (la, ra) = t.weighted(&mc, &rec, &y.left);
            let (lb, rb) = t.weighted(&mc, &rec, &y.right);
            let s = mc.cascade.shape().pair_sums(&la, &ra, &lb, &rb);
            (s[r - 1], mc.cascade.allowance())
        });
        let m = self.rsb.m();
        let reference = (m[r] - m[r - 1]) * rec.restricted_mean(y, r)?;
        Ok(pair_from(per, reference))
    }

    /// Top normalized weight and pair sum of the tilted cascade against the
    /// same statistics of an independent untilted cascade.
    pub fn tilt_invariance(&self, x: &PathFunctional, replicas: usize, seed: Seed) -> Result<[EstimatePair; 2]> {
        check_replicas(replicas)?;
        let rec = self.recursion(x)?;
        let tilted = seed.tagged("tilt-lhs");
        let plain = seed.tagged("tilt-rhs");
        let lhs = par::map_indexed(replicas, |i| {
            let mc = self.replica(tilted.replica(i));
            let t = tilt(&mc, &rec, x);
            let z = t.total();
            let w: Vec<f64> = t.leaf.iter().map(|a| a / z).collect();
            let allowance = mc.cascade.allowance();
            (top_and_pair(&w), allowance)
        });
        let rhs = par::map_indexed(replicas, |i| {
            let c = build_cascade(self.rsb, self.b, plain.replica(i)).expect("validated");
            (top_and_pair(c.w_compensated()), c.allowance())
        });
        let allowance = lhs.iter().chain(&rhs).map(|p| p.1).sum::<f64>() / replicas as f64;
        let side = |v: &[([f64; 2], f64)], j: usize| Estimate::from_samples(&v.iter().map(|p| p.0[j]).collect::<Vec<_>>());
        Ok([0, 1].map(|j| EstimatePair {
            lhs: side(&lhs, j),
            rhs: side(&rhs, j),
            allowance,
        }))
    }
}

fn top_and_pair(w: &[f64]) -> [f64; 2] {
    [
        w.iter().copied().fold(0.0, f64::max),
        w.iter().map(|x| x * x).sum(),
    ]
}

fn pair_from(per: Vec<(f64, f64)>, reference: f64) -> EstimatePair {
    let n = per.len() as f64;
    let samples: Vec<f64> = per.iter().map(|p| p.0).collect();
    let mass_error = per.iter().map(|p| p.1).sum::<f64>() / n;
    EstimatePair {
        lhs: Estimate::from_samples(&samples),
        rhs: Estimate::exact(reference),
        allowance: mass_error * reference.abs().max(1.0),
    }
}
