//! Subcommand dispatch. Each command returns its report and an optional
//! CSV table; nothing is written until the whole command has succeeded.

use serde_json::{json, Value};

use guerra_cascades::cascade::{build_cascade, overlap_mass_reference, overlap_masses};
use guerra_cascades::interpolation::{
    derivative_check, error_term_check, gibbs_overlap_mass, phi_series, phi_t, InterpolationSetup,
};
use guerra_cascades::optimize::optimize_bound;
use guerra_cascades::pd_process::{mark_moments, estimate_pair_sum, verify_invariance, PdStatistic};
use guerra_cascades::quadrature::QuadratureSpec;
use guerra_cascades::recursion::{guerra_bound, phi0};
use guerra_cascades::sk_model::{exact_free_energy, verify_bound, BoundParams};
use guerra_cascades::verify::run_all;
use guerra_cascades::{CheckRecord, Estimate, RsbParams, Seed};

use crate::config::{ConfigError, InterpolateCheck, RunConfig};
use crate::report::{Report, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Pd,
    Cascade,
    Bound,
    Optimize,
    SkExact,
    Interpolate,
    VerifyAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pd => "pd",
            Command::Cascade => "cascade",
            Command::Bound => "bound",
            Command::Optimize => "optimize",
            Command::SkExact => "sk-exact",
            Command::Interpolate => "interpolate",
            Command::VerifyAll => "verify-all",
        }
    }
}

pub struct Outcome {
    pub report: Report,
    pub table: Option<Table>,
    /// Extra JSON files (path, contents), such as a cascade snapshot.
    pub extra: Vec<(std::path::PathBuf, String)>,
}

fn f(x: f64) -> String {
    x.to_string()
}

fn quad(c: &RunConfig) -> QuadratureSpec {
    QuadratureSpec::with_nodes(c.nodes)
}

pub fn run(command: Command, c: &RunConfig) -> Result<Outcome, ConfigError> {
    let seed = Seed::new(c.seed).tagged(command.name());
    let mut records = Vec::new();
    let mut extra = Vec::new();
    let (result, table) = match command {
        Command::Pd => {
            if c.m.is_empty() {
                return Err(ConfigError("pd needs at least one m in (0, 1)".into()));
            }
            let mut table = Table::new(&["m", "pair_sum", "se", "target", "allowance"]);
            let mut sums = Vec::new();
            for (i, &m) in c.m.iter().enumerate() {
                let e = estimate_pair_sum(m, c.n_max, c.replicas, seed.child(i as u64))?;
                records.push(CheckRecord::equality(
                    format!("pair_sum m={m}"),
                    e.estimate,
                    Estimate::exact(1.0 - m),
                    c.sigmas,
                    e.allowance,
                ));
                table.push(vec![f(m), f(e.estimate.mean), f(e.estimate.std_error), f(1.0 - m), f(e.allowance)]);
                sums.push(json!({ "m": m, "estimate": e }));
            }
            let mut marks_out = Value::Null;
            if let Some(marks) = &c.marks {
                let m = c.m[0];
                let moments = mark_moments(m, marks, c.replicas, c.n_max, seed.tagged("marks"))?;
                for (j, p) in moments.iter().enumerate() {
                    records.push(p.check(format!("moment{} m={m}", j + 1), c.sigmas));
                }
                for stat in [PdStatistic::PairSum, PdStatistic::TopWeight, PdStatistic::WeightedMark] {
                    let p = verify_invariance(m, marks, stat, c.replicas, c.n_max, seed.tagged("invariance"))?;
                    records.push(p.check(format!("invariance {} m={m}", stat.name()), c.sigmas));
                }
                marks_out = json!({ "moments": moments });
            }
            (json!({ "pair_sums": sums, "marks": marks_out }), Some(table))
        }
        Command::Cascade => {
            let rsb = c.rsb()?;
            let est = overlap_masses(&rsb, c.b, c.replicas, seed)?;
            let mut table = Table::new(&["r", "mass", "se", "target", "allowance"]);
            for (r, (e, target)) in est.iter().zip(overlap_mass_reference(&rsb)).enumerate() {
                records.push(CheckRecord::equality(
                    format!("overlap_mass r={}", r + 1),
                    e.estimate,
                    Estimate::exact(target),
                    c.sigmas,
                    e.allowance,
                ));
                table.push(vec![(r + 1).to_string(), f(e.estimate.mean), f(e.estimate.std_error), f(target), f(e.allowance)]);
            }
            if let Some(path) = &c.snapshot {
                let one = build_cascade(&rsb, c.b, seed.tagged("snapshot"))?;
                extra.push((path.clone(), serde_json::to_string_pretty(&one.snapshot()).expect("serializes")));
            }
            (json!({ "overlap_masses": est }), Some(table))
        }
        Command::Bound => {
            let mix = c.mixture()?;
            if c.q_grid.is_empty() {
                let rsb = c.rsb()?;
                let b = guerra_bound(&rsb, &mix, c.h, &quad(c))?;
                let mut table = Table::new(&["phi0", "bound"]);
                table.push(vec![f(b.phi0), f(b.bound)]);
                let result = json!({
                    "phi0": b.phi0, "bound": b.bound, "params": rsb,
                    "quad_nodes": b.quad_nodes, "converged": b.converged,
                });
                (result, Some(table))
            } else {
                let m = if c.m.is_empty() { vec![1.0] } else { c.m.clone() };
                if m.len() != 1 {
                    return Err(ConfigError("a q_grid scan runs at k = 1 only".into()));
                }
                let mut table = Table::new(&["q1", "bound"]);
                let mut scan = Vec::new();
                for &q1 in &c.q_grid {
                    let b = guerra_bound(&RsbParams::new(&m, &[q1])?, &mix, c.h, &quad(c))?;
                    table.push(vec![f(q1), f(b.bound)]);
                    scan.push(json!({ "q1": q1, "bound": b.bound, "phi0": b.phi0 }));
                }
                (json!({ "scan": scan }), Some(table))
            }
        }
        Command::Optimize => {
            let mix = c.mixture()?;
            let res = optimize_bound(&mix, c.h, c.k, &quad(c), &c.optimizer)?;
            let mut table = Table::new(&["start", "bound"]);
            for (i, v) in res.restart_values.iter().enumerate() {
                table.push(vec![i.to_string(), f(*v)]);
            }
            let result = json!({
                "phi0": res.phi0, "bound": res.bound, "params": res.params,
                "quad_nodes": c.nodes, "converged": res.converged,
                "restart_values": res.restart_values, "evaluations": res.evaluations,
            });
            (result, Some(table))
        }
        Command::SkExact => {
            let mix = c.mixture()?;
            let fe = exact_free_energy(c.n, &mix, c.h, c.replicas, seed)?;
            let mut table = Table::new(&["replica", "log_partition_per_site"]);
            for (i, v) in fe.per_replica.iter().enumerate() {
                table.push(vec![i.to_string(), f(*v)]);
            }
            let mut result = json!({
                "N": c.n, "F_mean": fe.estimate.mean, "F_se": fe.estimate.std_error, "replicas": c.replicas,
            });
            if !c.q.is_empty() {
                let rsb = c.rsb()?;
                let rep = verify_bound(c.n, &mix, c.h, &BoundParams::Fixed(rsb), c.replicas, &quad(c), seed)?;
                records.push(CheckRecord::at_most(
                    "free_energy <= bound",
                    rep.free_energy,
                    Estimate::exact(rep.bound),
                    c.sigmas,
                    0.0,
                ));
                result["bound"] = json!(rep.bound);
            }
            (result, Some(table))
        }
        Command::Interpolate => {
            let setup = InterpolationSetup {
                n: c.n,
                mixture: c.mixture()?,
                rsb: c.rsb()?,
                b: c.b,
                h: c.h,
            };
            let result = match c.check {
                InterpolateCheck::Phi => {
                    let e = phi_t(&setup, c.t, c.replicas, seed.tagged("check"))?;
                    let oracle = if c.t == 0.0 {
                        Some(Estimate::exact(phi0(&setup.rsb, &setup.mixture, c.h, &quad(c))?.phi0))
                    } else if c.t == 1.0 {
                        Some(exact_free_energy(c.n, &setup.mixture, c.h, c.replicas, seed.tagged("oracle"))?.estimate)
                    } else {
                        None
                    };
                    if let Some(o) = oracle {
                        records.push(CheckRecord::equality(format!("phi t={}", c.t), e.estimate, o, c.sigmas, e.allowance));
                    }
                    json!({ "t": c.t, "phi": e })
                }
                InterpolateCheck::Derivative => {
                    let rep = derivative_check(&setup, c.t, c.delta, c.replicas, seed.tagged("check"))?;
                    records.push(rep.pair.check(format!("derivative t={}", c.t), c.sigmas));
                    json!(rep)
                }
                InterpolateCheck::Overlap => {
                    let e = gibbs_overlap_mass(&setup, c.t, c.r, c.replicas, seed.tagged("check"))?;
                    let target = overlap_mass_reference(&setup.rsb)[c.r - 1];
                    records.push(CheckRecord::equality(
                        format!("gibbs_overlap r={} t={}", c.r, c.t),
                        e.estimate,
                        Estimate::exact(target),
                        c.sigmas,
                        e.allowance,
                    ));
                    json!({ "t": c.t, "r": c.r, "mass": e, "target": target })
                }
                InterpolateCheck::ErrorTerm => {
                    let p = error_term_check(&setup, c.t, c.r, c.replicas, seed.tagged("check"))?;
                    records.push(p.check(format!("error_term r={} t={}", c.r, c.t), c.sigmas));
                    json!(p)
                }
            };
            let table = if c.csv.is_some() {
                let series = phi_series(&setup, &c.t_grid, c.replicas, seed.tagged("series"))?;
                let mut table = Table::new(&["t", "phi", "se"]);
                for (t, e) in c.t_grid.iter().zip(&series) {
                    table.push(vec![f(*t), f(e.mean), f(e.std_error)]);
                }
                Some(table)
            } else {
                None
            };
            (result, table)
        }
        Command::VerifyAll => {
            let outcomes = run_all(c.preset, Seed::new(c.seed), c.sigmas)?;
            let mut table = Table::new(&["criterion", "name", "lhs", "lhs_se", "rhs", "rhs_se", "tolerance", "pass"]);
            for o in &outcomes {
                for r in &o.records {
                    table.push(vec![
                        o.id.to_string(),
                        r.name.clone(),
                        f(r.lhs),
                        f(r.lhs_se),
                        f(r.rhs),
                        f(r.rhs_se),
                        f(r.tolerance),
                        r.pass.to_string(),
                    ]);
                    let mut r = r.clone();
                    r.name = format!("{}: {}", o.id, r.name);
                    records.push(r);
                }
            }
            (json!({ "preset": c.preset, "criteria": outcomes }), Some(table))
        }
    };
    Ok(Outcome {
        report: Report::new(command.name(), c, records, result),
        table,
        extra,
    })
}
