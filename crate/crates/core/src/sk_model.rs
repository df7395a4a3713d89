//! Finite-N mixed p-spin Hamiltonians and their exact free energy.
//!
//! A configuration is a bitmask with bit `i` set when `sigma_i = -1`.
//! Each monomial `sigma_{i_1} ... sigma_{i_p}` reduces to the parity
//! character of the indices that appear an odd number of times, so
//! `H = sum_S J_S chi_S` with independent Gaussian `J_S` whose variance only
//! depends on `|S|`. The full table follows from one Walsh–Hadamard transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Estimate, DEFAULT_SIGMAS};
use crate::mixture::{MixtureFunction, RsbParams};
use crate::optimize::{optimize_bound, OptimizerConfig};
use crate::par;
use crate::quadrature::{log_sum_exp, QuadratureSpec};
use crate::recursion::guerra_bound;
use crate::rng::{self, Seed};

pub const MAX_SITES: usize = 14;
pub const MAX_POWER: u32 = 4;
pub const MIN_DISORDER_REPLICAS: usize = 200;

/// Number of index words of length `p` over `n` letters whose odd-multiplicity
/// set is one fixed set of size `s`: `p! [x^p] sinh(x)^s cosh(x)^(n-s)`.
pub fn reduced_word_count(p: u32, n: usize, s: usize) -> f64 {
    let p = p as usize;
    if s > p || (p - s) % 2 == 1 || s > n {
        return 0.0;
    }
    let mut fact = vec![1.0; p + 1];
    for i in 1..=p {
        fact[i] = fact[i - 1] * i as f64;
    }
    let sinh: Vec<f64> = (0..=p).map(|j| if j % 2 == 1 { 1.0 / fact[j] } else { 0.0 }).collect();
    let cosh: Vec<f64> = (0..=p).map(|j| if j % 2 == 0 { 1.0 / fact[j] } else { 0.0 }).collect();
    let mul = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; p + 1];
        for i in 0..=p {
            for j in 0..=p - i {
                c[i + j] += a[i] * b[j];
            }
        }
        c
    };
    let pow = |base: &[f64], mut e: usize| -> Vec<f64> {
        let mut acc = vec![0.0; p + 1];
        acc[0] = 1.0;
        let mut b = base.to_vec();
        while e > 0 {
            if e & 1 == 1 {
                acc = mul(&acc, &b);
            }
            b = mul(&b, &b);
            e >>= 1;
        }
        acc
    };
    let series = mul(&pow(&sinh, s), &pow(&cosh, n - s));
    (series[p] * fact[p]).round()
}

/// In-place Walsh–Hadamard transform: `a[x] <- sum_y (-1)^{|x & y|} a[y]`.
pub fn walsh_hadamard(a: &mut [f64]) {
    let n = a.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for j in block..block + h {
                let (x, y) = (a[j], a[j + h]);
                a[j] = x + y;
                a[j + h] = x - y;
            }
        }
        h *= 2;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTable {
    pub n: usize,
    /// `H(sigma)` indexed by the configuration mask.
    pub values: Vec<f64>,
    /// Nonzero parity coefficients `(S, J_S)`.
    pub coefficients: Vec<(u32, f64)>,
}

/// Variance of `J_S` for `|S| = s`, chosen so that `E H H' = N xi(R)`.
pub fn coefficient_variance(mix: &MixtureFunction, n: usize, s: usize) -> f64 {
    mix.terms()
        .iter()
        .map(|&(p, beta)| 0.5 * beta * beta * (n as f64).powi(1 - p as i32) * reduced_word_count(p, n, s))
        .sum()
}

fn check_model(n: usize, mix: &MixtureFunction) -> Result<()> {
    if n == 0 || n > MAX_SITES {
        return Err(Error::Budget(format!("N = {n} outside 1..={MAX_SITES} for exact enumeration")));
    }
    if mix.max_power() > MAX_POWER {
        return Err(Error::Unsupported(format!(
            "p = {} above {MAX_POWER} in exact enumeration",
            mix.max_power()
        )));
    }
    Ok(())
}

pub fn sample_hamiltonian(n: usize, mix: &MixtureFunction, seed: Seed) -> Result<HamiltonianTable> {
    check_model(n, mix)?;
    let size = 1usize << n;
    let sd: Vec<f64> = (0..=n).map(|s| coefficient_variance(mix, n, s).sqrt()).collect();
    let mut rng = seed.stream();
    let mut values = vec![0.0; size];
    let mut coefficients = Vec::new();
    for (mask, slot) in values.iter_mut().enumerate() {
        let s = (mask as u32).count_ones() as usize;
        if sd[s] > 0.0 {
            let j = sd[s] * rng::normal(&mut rng);
            *slot = j;
            coefficients.push((mask as u32, j));
        }
    }
    walsh_hadamard(&mut values);
    Ok(HamiltonianTable { n, values, coefficients })
}

impl HamiltonianTable {
    /// `N^{-1} log sum_sigma exp(H(sigma) + h sum_i sigma_i)`.
    pub fn free_energy(&self, h: f64) -> f64 {
        let n = self.n as f64;
        let terms: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(mask, v)| v + h * (n - 2.0 * (mask as u32).count_ones() as f64))
            .collect();
        log_sum_exp(&terms) / n
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    pub n: usize,
    pub estimate: Estimate,
    /// Per-disorder `N^{-1} log Z`, in replica order.
    pub per_replica: Vec<f64>,
}

pub fn exact_free_energy(
    n: usize,
    mix: &MixtureFunction,
    h: f64,
    replicas: usize,
    seed: Seed,
) -> Result<FreeEnergyEstimate> {
    check_model(n, mix)?;
    if replicas < MIN_DISORDER_REPLICAS {
        return Err(Error::Domain(format!(
            "{replicas} disorder replicas; at least {MIN_DISORDER_REPLICAS} are required"
        )));
    }
    let base = seed.tagged("disorder");
    let per_replica = par::map_indexed(replicas, |i| {
        sample_hamiltonian(n, mix, base.replica(i)).expect("validated").free_energy(h)
    });
    Ok(FreeEnergyEstimate {
        n,
        estimate: Estimate::from_samples(&per_replica),
        per_replica,
    })
}

/// Where the bound parameters come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundParams {
    Fixed(RsbParams),
    Optimize { k: usize, config: OptimizerConfig },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub h: f64,
    pub free_energy: Estimate,
    pub bound: f64,
    pub params: RsbParams,
    /// `bound - free_energy`; negative means the estimate sits above the bound.
    pub margin: f64,
    pub pass: bool,
}

/// `F_N <= B` with `DEFAULT_SIGMAS` standard errors of slack.
pub fn verify_bound(
    n: usize,
    mix: &MixtureFunction,
    h: f64,
    params: &BoundParams,
    replicas: usize,
    quad: &QuadratureSpec,
    seed: Seed,
) -> Result<BoundReport> {
    let (params, bound) = match params {
        BoundParams::Fixed(p) => (p.clone(), guerra_bound(p, mix, h, quad)?.bound),
        BoundParams::Optimize { k, config } => {
            let r = optimize_bound(mix, h, *k, quad, config)?;
            (r.params, r.bound)
        }
    };
    let f = exact_free_energy(n, mix, h, replicas, seed)?;
    let margin = bound - f.estimate.mean;
    Ok(BoundReport {
        n,
        h,
        free_energy: f.estimate,
        bound,
        params,
        margin,
        // roundoff floor for disorder-free models where the error is exactly 0
        pass: -margin <= DEFAULT_SIGMAS * f.estimate.std_error + 1e-12,
    })
}
