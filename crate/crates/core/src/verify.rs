//! The acceptance matrix as a reusable suite of named criteria.

use serde::{Deserialize, Serialize};

use crate::cascade::{overlap_mass_reference, overlap_masses, MarkedSetup};
use crate::error::{Error, Result};
use crate::estimate::{CheckRecord, Estimate, EstimatePair, TruncatedEstimate};
use crate::functional::{PairFunctional, PathFunctional};
use crate::interpolation::{derivative_check, error_term_check, gibbs_overlap_masses, coupled_average, InterpolationSetup, OverlapKernel};
use crate::mixture::{MixtureFunction, RsbParams};
use crate::mu_quadrature::{mu_r_quadrature, ROUTE_TOLERANCE};
use crate::optimize::{optimize_bound, OptimizerConfig};
use crate::pd_process::{mark_moments, estimate_pair_sum, verify_invariance, MarkSpec, PdStatistic};
use crate::quadrature::QuadratureSpec;
use crate::rng::Seed;
use crate::sk_model::{verify_bound, BoundParams};

/// Problem sizes of one run of the suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// The sizes the acceptance criteria name.
    Desk,
    /// Small sizes for a quick end-to-end pass; tolerances are unchanged but
    /// the statistics are weak.
    Smoke,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Preset> {
        match s {
            "desk" => Ok(Preset::Desk),
            "smoke" => Ok(Preset::Smoke),
            other => Err(Error::Domain(format!("unknown preset `{other}` (desk, smoke)"))),
        }
    }

    fn sizes(self) -> Sizes {
        match self {
            Preset::Desk => Sizes {
                pd_n_max: 100_000,
                pd_replicas: 5000,
                mark_n_max: 10_000,
                mark_replicas: 5000,
                cascade_b: 200,
                cascade_replicas: 2000,
                marked_b: 100,
                marked_replicas: 1000,
                sk_n: 10,
                sk_replicas: 2000,
                interp_b: 100,
                interp_replicas: 1000,
                mu_replicas: 2000,
            },
            Preset::Smoke => Sizes {
                pd_n_max: 2000,
                pd_replicas: 300,
                mark_n_max: 1000,
                mark_replicas: 300,
                cascade_b: 60,
                cascade_replicas: 300,
                marked_b: 40,
                marked_replicas: 200,
                sk_n: 6,
                sk_replicas: 200,
                interp_b: 30,
                interp_replicas: 120,
                mu_replicas: 300,
            },
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Sizes {
    pd_n_max: usize,
    pd_replicas: usize,
    mark_n_max: usize,
    mark_replicas: usize,
    cascade_b: usize,
    cascade_replicas: usize,
    marked_b: usize,
    marked_replicas: usize,
    sk_n: usize,
    sk_replicas: usize,
    interp_b: usize,
    interp_replicas: usize,
    mu_replicas: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub title: String,
    pub records: Vec<CheckRecord>,
    pub pass: bool,
}

/// Number of criteria run by [`run_criterion`].
pub const CRITERIA: usize = 11;

pub fn criterion_title(id: usize) -> &'static str {
    match id {
        1 => "PD pair sum",
        2 => "mark moment identities",
        3 => "tilted-mark invariance",
        4 => "cascade overlap masses",
        5 => "log-partition identity",
        6 => "tilted and restricted averages",
        7 => "bound dominates exact free energy",
        8 => "replica-symmetric closed form",
        9 => "interpolation derivative",
        10 => "Gibbs overlap masses",
        11 => "error term and coupled measure",
        _ => "unknown",
    }
}

fn truncated(name: String, e: &TruncatedEstimate, target: f64, sigmas: f64) -> CheckRecord {
    CheckRecord::equality(name, e.estimate, Estimate::exact(target), sigmas, e.allowance)
}

fn pair(name: String, p: &EstimatePair, sigmas: f64) -> CheckRecord {
    p.check(name, sigmas)
}

fn mark_families() -> [(&'static str, MarkSpec); 2] {
    [
        ("lognormal", MarkSpec::LogNormal { sigma: 0.5, shift: 1.0, rho: 0.6 }),
        ("two_point", MarkSpec::two_point(1.0, 2.0)),
    ]
}

fn interpolation_setup(b: usize, m_last: f64) -> InterpolationSetup {
    InterpolationSetup {
        n: 4,
        mixture: MixtureFunction::sk(0.5).expect("valid"),
        rsb: RsbParams::new(&[0.4, m_last], &[0.3, 0.7]).expect("valid"),
        b,
        h: 0.3,
    }
}

/// Runs one criterion. Seeds derive from `seed` and the criterion id only,
/// so criteria can run in any order or alone.
pub fn run_criterion(id: usize, preset: Preset, seed: Seed, sigmas: f64) -> Result<CriterionOutcome> {
    let s = preset.sizes();
    let seed = seed.tagged("criterion").child(id as u64);
    let quad = QuadratureSpec::default();
    let mut records = Vec::new();
    match id {
        1 => {
            for (i, m) in [0.3, 0.5, 0.7].into_iter().enumerate() {
                let e = estimate_pair_sum(m, s.pd_n_max, s.pd_replicas, seed.child(i as u64))?;
                records.push(truncated(format!("pair_sum m={m}"), &e, 1.0 - m, sigmas));
            }
        }
        2 => {
            for (name, marks) in mark_families() {
                let pairs = mark_moments(0.5, &marks, s.mark_replicas, s.mark_n_max, seed.tagged(name))?;
                for (j, p) in pairs.iter().enumerate() {
                    records.push(pair(format!("moment{} {name}", j + 1), p, sigmas));
                }
            }
        }
        3 => {
            for (name, marks) in mark_families() {
                for stat in [PdStatistic::PairSum, PdStatistic::TopWeight, PdStatistic::WeightedMark] {
                    let p = verify_invariance(0.5, &marks, stat, s.mark_replicas, s.mark_n_max, seed.tagged(name))?;
                    records.push(pair(format!("{} {name}", stat.name()), &p, sigmas));
                }
            }
        }
        4 => {
            let rsb = RsbParams::new(&[0.4, 0.8], &[0.3, 0.6])?;
            let est = overlap_masses(&rsb, s.cascade_b, s.cascade_replicas, seed)?;
            for (r, (e, target)) in est.iter().zip(overlap_mass_reference(&rsb)).enumerate() {
                records.push(truncated(format!("overlap_mass r={}", r + 1), e, target, sigmas));
            }
        }
        5 => {
            let one = RsbParams::new(&[0.5], &[0.5])?;
            let two = RsbParams::new(&[0.3, 0.7], &[0.3, 0.6])?;
            let cases = [
                (&one, vec![0.8], PathFunctional::linear(&[1.0])),
                (&one, vec![0.8], PathFunctional::log_cosh(1.0, 0.3)),
                (&two, vec![0.6, 0.6], PathFunctional::linear(&[1.0, 1.0])),
                (&two, vec![0.6, 0.6], PathFunctional::log_cosh(1.0, 0.3)),
            ];
            for (i, (rsb, sd, x)) in cases.iter().enumerate() {
                let setup = MarkedSetup { rsb, b: s.marked_b, mark_sd: sd, quad };
                let p = setup.log_partition_identity(x, s.marked_replicas, seed.child(i as u64))?;
                let kind = if matches!(x, PathFunctional::Linear { .. }) { "linear" } else { "log_cosh" };
                records.push(pair(format!("log_partition k={} {kind}", rsb.k()), &p, sigmas));
            }
        }
        6 => {
            let rsb = RsbParams::new(&[0.3, 0.7], &[0.3, 0.6])?;
            let sd = [0.6, 0.6];
            let setup = MarkedSetup { rsb: &rsb, b: s.marked_b, mark_sd: &sd, quad };
            let y = PathFunctional::linear(&[1.0, -0.5]);
            let pair_y = PairFunctional::product(PathFunctional::linear(&[1.0, 0.0]), PathFunctional::linear(&[0.5, 1.0]));
            let xs = [
                ("linear", PathFunctional::linear(&[1.0, 1.0])),
                ("quadratic", PathFunctional::quadratic(&[0.5, 1.0], 0.2)),
            ];
            for (i, (name, x)) in xs.iter().enumerate() {
                let sub = seed.child(i as u64);
                let p = setup.tilted_average(x, &y, s.marked_replicas, sub)?;
                records.push(pair(format!("tilted {name}"), &p, sigmas));
                for r in 1..=2 {
                    let p = setup.restricted_average(x, &pair_y, r, s.marked_replicas, sub)?;
                    records.push(pair(format!("restricted r={r} {name}"), &p, sigmas));
                }
            }
        }
        7 => {
            let cfg = OptimizerConfig::default();
            for beta in [0.6, 1.5] {
                for h in [0.0, 0.3] {
                    let mix = MixtureFunction::sk(beta)?;
                    let rep = verify_bound(
                        s.sk_n,
                        &mix,
                        h,
                        &BoundParams::Optimize { k: 2, config: cfg },
                        s.sk_replicas,
                        &quad,
                        seed.tagged("sk"),
                    )?;
                    records.push(CheckRecord::at_most(
                        format!("free_energy <= bound beta={beta} h={h}"),
                        rep.free_energy,
                        Estimate::exact(rep.bound),
                        sigmas,
                        0.0,
                    ));
                }
            }
            let mix = MixtureFunction::sk(1.5)?;
            let k1 = optimize_bound(&mix, 0.0, 1, &quad, &cfg)?;
            let k2 = optimize_bound(&mix, 0.0, 2, &quad, &cfg)?;
            records.push(CheckRecord::strictly_below("bound k=2 < k=1 beta=1.5 h=0", k2.bound, k1.bound));
        }
        8 => {
            let beta: f64 = 0.4;
            let mix = MixtureFunction::sk(beta)?;
            let res = optimize_bound(&mix, 0.0, 1, &quad, &OptimizerConfig::default())?;
            let target = std::f64::consts::LN_2 + beta * beta / 4.0;
            records.push(CheckRecord::equality(
                "replica_symmetric beta=0.4",
                Estimate::exact(res.bound),
                Estimate::exact(target),
                sigmas,
                1e-3,
            ));
        }
        9 => {
            let setup = interpolation_setup(s.interp_b, 0.95);
            let rep = derivative_check(&setup, 0.5, crate::interpolation::DEFAULT_DELTA, s.interp_replicas, seed)?;
            records.push(pair("derivative t=0.5".into(), &rep.pair, sigmas));
            records.push(CheckRecord::at_most(
                "formula <= formula without error term",
                rep.formula,
                rep.formula_without_error,
                0.0,
                0.0,
            ));
        }
        10 => {
            let setup = interpolation_setup(s.interp_b, 0.8);
            let targets = overlap_mass_reference(&setup.rsb);
            let mut per_t = Vec::new();
            for t in [0.1, 0.9] {
                let est = gibbs_overlap_masses(&setup, t, s.interp_replicas, seed.tagged(&format!("t={t}")))?;
                for (r, (e, target)) in est.iter().zip(&targets).enumerate() {
                    records.push(truncated(format!("gibbs_overlap r={} t={t}", r + 1), e, *target, sigmas));
                }
                per_t.push(est);
            }
            for (r, (a, b)) in per_t[0].iter().zip(&per_t[1]).enumerate() {
                records.push(CheckRecord::equality(
                    format!("t-independence r={}", r + 1),
                    a.estimate,
                    b.estimate,
                    sigmas,
                    a.allowance + b.allowance,
                ));
            }
        }
        11 => {
            let setup = interpolation_setup(s.interp_b, 0.95);
            for r in 1..=2 {
                let p = error_term_check(&setup, 0.5, r, s.interp_replicas, seed.child(r as u64))?;
                records.push(pair(format!("error_term r={r}"), &p, sigmas));
                records.push(CheckRecord::at_most(
                    format!("error_term r={r} nonnegative"),
                    Estimate::exact(0.0),
                    p.lhs,
                    sigmas,
                    0.0,
                ));
            }
            let one_site = InterpolationSetup { n: 1, ..setup.clone() };
            let mix = &one_site.mixture;
            for r in 1..=2 {
                let q = one_site.rsb.q()[r];
                for (name, kernel) in [("overlap", OverlapKernel::Overlap), ("error_density", OverlapKernel::ErrorDensity { q })] {
                    let quad_small = QuadratureSpec::with_nodes(16);
                    let rep = mu_r_quadrature(1, mix, &one_site.rsb, one_site.h, 0.5, r, kernel, &quad_small)?;
                    let mc = coupled_average(&one_site, 0.5, r, kernel, s.mu_replicas, seed.tagged(name).child(r as u64))?;
                    records.push(truncated(format!("mu_r N=1 r={r} {name}"), &mc, rep.w_route, sigmas));
                    records.push(CheckRecord::equality(
                        format!("mu_r routes r={r} {name}"),
                        Estimate::exact(rep.w_route),
                        Estimate::exact(rep.v_route),
                        sigmas,
                        ROUTE_TOLERANCE,
                    ));
                    records.push(CheckRecord::equality(
                        format!("mu_r(1) r={r} {name}"),
                        Estimate::exact(rep.normalization),
                        Estimate::exact(1.0),
                        sigmas,
                        ROUTE_TOLERANCE,
                    ));
                    records.push(CheckRecord::equality(
                        format!("coupled root r={r} {name}"),
                        Estimate::exact(rep.root_gap),
                        Estimate::exact(0.0),
                        sigmas,
                        ROUTE_TOLERANCE,
                    ));
                }
            }
        }
        other => return Err(Error::Domain(format!("no criterion {other} (1..={CRITERIA})"))),
    }
    let pass = records.iter().all(|r| r.pass);
    Ok(CriterionOutcome {
        id,
        title: criterion_title(id).into(),
        records,
        pass,
    })
}

pub fn run_all(preset: Preset, seed: Seed, sigmas: f64) -> Result<Vec<CriterionOutcome>> {
    (1..=CRITERIA).map(|id| run_criterion(id, preset, seed, sigmas)).collect()
}
