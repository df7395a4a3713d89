//! wasm-bindgen exports for the static demo page in `www/`.

use wasm_bindgen::prelude::*;

use guerra_cascades::cascade::overlap_masses as cascade_masses;
use guerra_cascades::pd_process::sample_pd;
use guerra_cascades::quadrature::QuadratureSpec;
use guerra_cascades::recursion::guerra_bound;
use guerra_cascades::{MixtureFunction, Result, RsbParams, Seed};

/// Replicas above this would stall the page.
pub const MAX_REPLICAS: usize = 2000;

/// k = 1 bound of the SK model with `m_1 = 1`, one value per `q_1`.
pub fn scan(beta: f64, h: f64, q_points: &[f64]) -> Result<Vec<f64>> {
    let mix = MixtureFunction::sk(beta)?;
    let quad = QuadratureSpec::default();
    q_points
        .iter()
        .map(|&q| Ok(guerra_bound(&RsbParams::new(&[1.0], &[q])?, &mix, h, &quad)?.bound))
        .collect()
}

/// Normalized PD(m, 0) weights, largest first.
pub fn weights(m: f64, n: usize, seed: u32) -> Result<Vec<f64>> {
    Ok(sample_pd(m, n, Seed::new(seed as u64))?.w)
}

/// Two-level overlap masses for `r = 1, 2, 3`: three means, then three
/// standard errors, then the truncation allowance.
pub fn masses(m: [f64; 2], q: [f64; 2], b: usize, replicas: usize, seed: u32) -> Result<Vec<f64>> {
    if replicas > MAX_REPLICAS {
        return Err(guerra_cascades::Error::Budget(format!("at most {MAX_REPLICAS} replicas in the browser")));
    }
    let est = cascade_masses(&RsbParams::new(&m, &q)?, b, replicas, Seed::new(seed as u64))?;
    let mut out: Vec<f64> = est.iter().map(|e| e.estimate.mean).collect();
    out.extend(est.iter().map(|e| e.estimate.std_error));
    out.push(est[0].allowance);
    Ok(out)
}

fn js(e: guerra_cascades::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn bound_scan(beta: f64, h: f64, q_points: &[f64]) -> std::result::Result<Vec<f64>, JsError> {
    scan(beta, h, q_points).map_err(js)
}

#[wasm_bindgen]
pub fn pd_weights(m: f64, n: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    weights(m, n, seed).map_err(js)
}

#[wasm_bindgen]
pub fn overlap_masses(
    m1: f64,
    m2: f64,
    q1: f64,
    q2: f64,
    b: usize,
    replicas: usize,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    masses([m1, m2], [q1, q2], b, replicas, seed).map_err(js)
}
