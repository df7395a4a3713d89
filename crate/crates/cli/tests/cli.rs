use std::process::{Command, Output};

use serde_json::Value;

fn guerra(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_guerra"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("GUERRA_WORKERS", w),
        None => cmd.env_remove("GUERRA_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn without_timestamp(stdout: &[u8]) -> Value {
    let mut v: Value = serde_json::from_slice(stdout).expect("json report");
    v["provenance"].as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn malformed_m_is_a_config_error() {
    let out = guerra(&["cascade", "--m", "0.8,0.4", "--q", "0.3,0.6"], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("strictly increasing"), "{err}");
    assert!(out.stdout.is_empty(), "no partial report on failure");
}

#[test]
fn usage_and_config_errors_exit_two() {
    assert_eq!(guerra(&["cascade", "--bogus"], None).status.code(), Some(2));
    assert_eq!(guerra(&["pd", "--set", "nonsense=1"], None).status.code(), Some(2));
    assert_eq!(guerra(&["pd", "--m", "0.5"], Some("zero")).status.code(), Some(2));
    assert_eq!(guerra(&["bound", "--m", "0.5", "--q", "0.5"], None).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(guerra(&["pd", "--config", missing.to_str().unwrap()], None).status.code(), Some(2));
}

#[test]
fn tolerance_failure_exits_one() {
    // a vanishing multiplier turns Monte Carlo noise into a failure
    let out = guerra(&["pd", "--m", "0.5", "--replicas", "50", "--n-max", "200", "--sigmas", "1e-9"], None);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], Value::Bool(false));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let csv = dir.path().join("masses.csv");
    std::fs::write(&cfg, "seed = 5\nm = [0.4, 0.8]\nq = [0.3, 0.6]\nb = 40\nreplicas = 50\n").unwrap();
    let out = guerra(
        &["cascade", "--config", cfg.to_str().unwrap(), "--replicas", "300", "--csv", csv.to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["provenance"]["seed"], 5);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["result"]["overlap_masses"][0]["estimate"]["replicas"], 300);
    let table = std::fs::read_to_string(csv).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "r,mass,se,target,allowance");
    assert_eq!(rows.len(), 4);
}

#[test]
fn output_independent_of_worker_count() {
    let args = ["interpolate", "--m", "0.4,0.95", "--q", "0.3,0.7", "--mixture", "2:0.5", "--b", "10", "--replicas", "40", "--check", "overlap", "--seed", "3"];
    let one = guerra(&args, Some("1"));
    let three = guerra(&args, Some("3"));
    let again = guerra(&args, None);
    assert_eq!(one.status.code(), three.status.code());
    assert_eq!(without_timestamp(&one.stdout), without_timestamp(&three.stdout));
    assert_eq!(without_timestamp(&one.stdout), without_timestamp(&again.stdout));
}

#[test]
fn phi_series_without_disorder_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("phi.csv");
    let out = guerra(
        &["interpolate", "--mixture", "[]", "--h", "0.3", "--m", "0.4,0.95", "--q", "0.3,0.7", "--b", "10", "--replicas", "5", "--csv", csv.to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let expected = (2.0 * 0.3f64.cosh()).ln();
    let table = std::fs::read_to_string(csv).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("t,phi,se"));
    let rows: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(rows.len(), 11);
    for phi in rows {
        assert!((phi - expected).abs() < 1e-12);
    }
}

#[test]
fn bound_scan_minimum_at_small_q() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scan.csv");
    let out = guerra(&["bound", "--mixture", "2:0.4", "--q-grid", "0.02,0.1,0.2,0.4,0.6,0.8", "--csv", csv.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(csv).unwrap();
    let rows: Vec<(f64, f64)> = table
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|x| x.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    let best = rows.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(best.0, 0.02);
}

#[test]
fn overlap_mass_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("masses.csv");
    let out = guerra(&["cascade", "--m", "0.4,0.8", "--q", "0.3,0.6", "--b", "100", "--replicas", "400", "--csv", csv.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let targets: Vec<f64> = std::fs::read_to_string(csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    for (t, e) in targets.iter().zip([0.4, 0.4, 0.2]) {
        assert!((t - e).abs() < 1e-12);
    }
}

#[test]
fn verify_all_smoke_is_deterministic() {
    let a = guerra(&["verify-all", "--preset", "smoke", "--seed", "11"], Some("1"));
    let b = guerra(&["verify-all", "--preset", "smoke", "--seed", "11"], Some("2"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(without_timestamp(&a.stdout), without_timestamp(&b.stdout));
    let v = without_timestamp(&a.stdout);
    assert_eq!(v["result"]["criteria"].as_array().unwrap().len(), 11);
}
