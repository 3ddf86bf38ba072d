//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every export returns a JSON string. The logic lives in plain functions so
//! it can be tested natively.

use radpair_core::analysis::{compare_models, early_time_check, EARLY_TIME_MAX_STEP};
use radpair_core::trajectory::run_ensemble;
use radpair_core::{Model, ModelSpec, Preset, SpinSystem, TimeGrid, TrajectoryConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Keeps the page responsive: steps × molecules per ensemble request.
pub const MAX_ENSEMBLE_WORK: f64 = 2e8;

const CURVE_POINTS: usize = 200;

fn setup(preset: &str, k_s: f64) -> Result<(SpinSystem, Preset, ModelSpec), String> {
    let preset: Preset = preset.parse().map_err(|e: radpair_core::Error| e.to_string())?;
    let sys = SpinSystem::new(0).map_err(|e| e.to_string())?;
    let spec = ModelSpec::new(&sys, Model::TraceDecaying, k_s).map_err(|e| e.to_string())?;
    Ok((sys, preset, spec))
}

pub fn evolve_json(preset: &str, k_s: f64, t_max: f64) -> Result<String, String> {
    let (sys, preset, spec) = setup(preset, k_s)?;
    let dt = 1e-3 / k_s;
    let steps = (t_max / dt).round().max(1.0) as usize;
    let grid = TimeGrid::new(t_max, dt, (steps / CURVE_POINTS).max(1)).map_err(|e| e.to_string())?;
    let rho0 = sys.density_from_preset(preset);
    let r = compare_models(&rho0, &spec, &grid).map_err(|e| e.to_string())?;
    Ok(json!({
        "t": r.times,
        "tr_eq1": r.trace_traced,
        "ps_eq2": r.p_singlet_normalized,
        "ps_eq3": r.p_singlet_mixture,
        "dist_eq2_eq3": r.dist_normalized_mixture,
        "eff_rate_eq2": r.effective_rate_normalized,
    })
    .to_string())
}

pub fn ensemble_json(preset: &str, k_s: f64, t_max: f64, n_traj: u32, seed: u64) -> Result<String, String> {
    let (sys, preset, spec) = setup(preset, k_s)?;
    let dt = 1e-3 / k_s;
    let steps = (t_max / dt).round().max(1.0);
    if steps * n_traj as f64 > MAX_ENSEMBLE_WORK {
        return Err(format!("ensemble too large for the browser: {n_traj} molecules x {steps} steps"));
    }
    let cfg = TrajectoryConfig {
        n_traj: n_traj as usize,
        dt,
        t_max,
        seed,
        record_stride: (steps as usize / 50).max(1),
    };
    let rho0 = sys.density_from_preset(preset);
    let est = run_ensemble(&rho0, &spec, &cfg).map_err(|e| e.to_string())?;
    Ok(json!({
        "t": est.times,
        "survival": est.survival_frac,
        "survival_se": est.survival_se,
        "ps_nr": est.p_singlet_nr,
        "ps_nr_se": est.p_singlet_nr_se,
        "w0_frac": est.w0_frac,
    })
    .to_string())
}

pub fn early_time_json(preset: &str, k_s: f64) -> Result<String, String> {
    let (sys, preset, spec) = setup(preset, k_s)?;
    let rho0 = sys.density_from_preset(preset);
    let mut dts = Vec::new();
    let mut eq2 = Vec::new();
    let mut eq3 = Vec::new();
    for decade in 0..3 {
        let dt = EARLY_TIME_MAX_STEP / k_s / 10f64.powi(decade);
        let r = early_time_check(&rho0, &spec, dt).map_err(|e| e.to_string())?;
        dts.push(dt);
        eq2.push(r.defect_normalized);
        eq3.push(r.defect_mixture);
    }
    Ok(json!({ "dt": dts, "defect_eq2": eq2, "defect_eq3": eq3 }).to_string())
}

#[wasm_bindgen]
pub fn evolve(preset: &str, k_s: f64, t_max: f64) -> Result<String, JsError> {
    evolve_json(preset, k_s, t_max).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ensemble(preset: &str, k_s: f64, t_max: f64, n_traj: u32, seed: u64) -> Result<String, JsError> {
    ensemble_json(preset, k_s, t_max, n_traj, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn early_time(preset: &str, k_s: f64) -> Result<String, JsError> {
    early_time_json(preset, k_s).map_err(|e| JsError::new(&e))
}
