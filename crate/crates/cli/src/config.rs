//! Run configuration: a TOML file plus `key = value` overrides from flags.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use guerra_cascades::optimize::OptimizerConfig;
use guerra_cascades::pd_process::MarkSpec;
use guerra_cascades::verify::Preset;
use guerra_cascades::{MixtureFunction, RsbParams};

/// Which identity `interpolate` checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolateCheck {
    Phi,
    Derivative,
    Overlap,
    ErrorTerm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// `(p, beta_p)` pairs.
    pub mixture: Vec<(u32, f64)>,
    pub h: f64,
    /// `m_1..m_k`; for `pd`, the list of PD parameters to run.
    pub m: Vec<f64>,
    /// `q_1..q_k`.
    pub q: Vec<f64>,
    /// Depth for `optimize`.
    pub k: usize,
    /// Number of sites.
    pub n: usize,
    /// Cascade branching.
    pub b: usize,
    pub n_max: usize,
    pub replicas: usize,
    pub nodes: usize,
    pub t: f64,
    pub r: usize,
    pub delta: f64,
    pub check: InterpolateCheck,
    /// Times at which `interpolate` tabulates `phi` for the CSV.
    pub t_grid: Vec<f64>,
    /// `q_1` values for a `k = 1` bound scan.
    pub q_grid: Vec<f64>,
    pub marks: Option<MarkSpec>,
    pub preset: Preset,
    pub sigmas: f64,
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    /// Where `cascade` writes one realization.
    pub snapshot: Option<PathBuf>,
    pub optimizer: OptimizerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            mixture: vec![(2, 1.0)],
            h: 0.0,
            m: Vec::new(),
            q: Vec::new(),
            k: 1,
            n: 4,
            b: 100,
            n_max: 10_000,
            replicas: 1000,
            nodes: 40,
            t: 0.5,
            r: 1,
            delta: 0.02,
            check: InterpolateCheck::Phi,
            t_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            q_grid: Vec::new(),
            marks: None,
            preset: Preset::Desk,
            sigmas: 3.0,
            json: None,
            csv: None,
            snapshot: None,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<guerra_cascades::Error> for ConfigError {
    fn from(e: guerra_cascades::Error) -> Self {
        ConfigError(e.to_string())
    }
}

/// Reads a flag value as a TOML value. Bare comma lists become arrays,
/// `p:beta` items become pairs, anything else unparseable is a string.
pub fn parse_value(raw: &str) -> toml::Value {
    let attempt = |s: &str| {
        toml::from_str::<toml::Table>(&format!("v = {s}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
    };
    if let Some(v) = attempt(raw) {
        return v;
    }
    if raw.contains(':') {
        let pairs: Vec<String> = raw.split(',').map(|p| format!("[{}]", p.replace(':', ","))).collect();
        if let Some(v) = attempt(&format!("[{}]", pairs.join(","))) {
            return v;
        }
    }
    if raw.contains(',') {
        if let Some(v) = attempt(&format!("[{raw}]")) {
            return v;
        }
    }
    toml::Value::String(raw.to_string())
}

/// Keys whose single-value flags mean a one-element list.
const LIST_KEYS: [&str; 4] = ["m", "q", "t_grid", "q_grid"];

/// Config file (if any) with overrides applied, then validated.
pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            toml::from_str::<toml::Table>(&text).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for (key, raw) in overrides {
        let mut value = parse_value(raw);
        if LIST_KEYS.contains(&key.as_str()) && !value.is_array() {
            value = toml::Value::Array(vec![value]);
        }
        table.insert(key.clone(), value);
    }
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError(e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        let c: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.message().to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }

    /// An empty list is the disorder-free model.
    pub fn mixture(&self) -> Result<MixtureFunction, ConfigError> {
        if self.mixture.is_empty() {
            return Ok(MixtureFunction::zero());
        }
        Ok(MixtureFunction::new(&self.mixture)?)
    }

    pub fn rsb(&self) -> Result<RsbParams, ConfigError> {
        if self.m.is_empty() {
            return Err(ConfigError("this command needs `m` and `q`".into()));
        }
        Ok(RsbParams::new(&self.m, &self.q)?)
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |s: String| Err(ConfigError(s));
        self.mixture()?;
        // `pd` reads `m` alone as a plain list; with `q` it is a parameter pair
        if !self.q.is_empty() {
            self.rsb()?;
        }
        if !(self.sigmas > 0.0 && self.sigmas.is_finite()) {
            return bad(format!("sigmas = {} must be positive", self.sigmas));
        }
        if !self.h.is_finite() {
            return bad("h must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.t) {
            return bad(format!("t = {} outside [0, 1]", self.t));
        }
        if let Some(t) = self.t_grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return bad(format!("t_grid entry {t} outside [0, 1]"));
        }
        if let Some(q) = self.q_grid.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return bad(format!("q_grid entry {q} outside (0, 1)"));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return bad(format!("delta = {} outside (0, 0.5)", self.delta));
        }
        if self.replicas < 2 {
            return bad("replicas must be at least 2".into());
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.nodes < 8 {
            return bad(format!("nodes = {} is below the minimum of 8", self.nodes));
        }
        if let Some(marks) = &self.marks {
            marks.validate()?;
        }
        Ok(())
    }
}
