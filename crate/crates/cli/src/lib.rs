//! Batch front-end: `evolve`, `trajectories` and `check`.
//!
//! Every command renders its output fully in memory and only then writes it,
//! so a failed run never leaves a partial file behind.

pub mod config;
pub mod output;

use serde::Serialize;
use thiserror::Error;

use radpair_core::analysis::{compare_models, early_time_check, singlet_probability};
use radpair_core::master::{integrate, oracle_max_error, TimeGrid};
use radpair_core::trajectory::{run_ensemble_with, EnsembleEstimate, Execution};
use radpair_core::Model;

pub use config::RunConfig;
use output::{sig9, sig9_opt};

pub const EVOLVE_HEADER: &str = "t,tr_eq1,ps_eq1norm,ps_eq2,ps_eq3,dist_eq2_eq3,eff_rate_eq2";
pub const TRAJECTORIES_HEADER: &str = "t,n_unrec,survival,survival_se,w0_frac,ps_nr,ps_nr_se";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<radpair_core::Error> for CliError {
    fn from(e: radpair_core::Error) -> Self {
        use radpair_core::Error as E;
        match e {
            E::NumericalFailure { .. } | E::SingularProjection { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

/// Comparison of the three models on the `run` grid, one CSV row per recorded time.
pub fn evolve_csv(cfg: &RunConfig) -> Result<String, CliError> {
    let sys = cfg.system()?;
    let rho0 = sys.density_from_preset(cfg.initial_state);
    let spec = cfg.model_spec(&sys, Model::TraceDecaying)?;
    let rep = compare_models(&rho0, &spec, &cfg.grid()?)?;

    let mut out = String::with_capacity(64 * (rep.times.len() + 1));
    out.push_str(EVOLVE_HEADER);
    out.push('\n');
    for i in 0..rep.times.len() {
        let row = [
            sig9(rep.times[i]),
            sig9(rep.trace_traced[i]),
            sig9(rep.p_singlet_traced[i]),
            sig9(rep.p_singlet_normalized[i]),
            sig9_opt(rep.p_singlet_mixture.as_ref().map(|v| v[i])),
            sig9_opt(rep.dist_normalized_mixture.as_ref().map(|v| v[i])),
            sig9(rep.effective_rate_normalized[i]),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn ensemble(cfg: &RunConfig, exec: Execution) -> Result<EnsembleEstimate, CliError> {
    let sys = cfg.system()?;
    let rho0 = sys.density_from_preset(cfg.initial_state);
    let spec = cfg.model_spec(&sys, Model::TraceDecaying)?;
    Ok(run_ensemble_with(&rho0, &spec, &cfg.trajectory_config(), exec)?)
}

pub fn trajectories_csv_from(est: &EnsembleEstimate) -> String {
    let mut out = String::with_capacity(64 * (est.times.len() + 1));
    out.push_str(TRAJECTORIES_HEADER);
    out.push('\n');
    for i in 0..est.times.len() {
        let row = [
            sig9(est.times[i]),
            est.n_unrecombined[i].to_string(),
            sig9(est.survival_frac[i]),
            sig9(est.survival_se[i]),
            sig9_opt(est.w0_frac[i]),
            sig9_opt(est.p_singlet_nr[i]),
            sig9_opt(est.p_singlet_nr_se[i]),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn trajectories_csv(cfg: &RunConfig, exec: Execution) -> Result<String, CliError> {
    Ok(trajectories_csv_from(&ensemble(cfg, exec)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub defect_eq2: Option<f64>,
    pub defect_eq3: Option<f64>,
    pub recombined_fraction_x: Option<f64>,
    pub oracle_max_error_eq1: Option<f64>,
    pub oracle_max_error_eq2: Option<f64>,
    pub oracle_max_error_eq3: Option<f64>,
    /// |MC − reference| / MC standard error, at the recorded time nearest 1/k_s.
    pub mc_vs_eq2_sigma: Option<f64>,
    pub mc_vs_eq3_sigma: Option<f64>,
}

/// Early-time defects, integrator-vs-closed-form errors and the Monte Carlo verdict.
pub fn check(cfg: &RunConfig, exec: Execution) -> Result<CheckSummary, CliError> {
    let sys = cfg.system()?;
    let rho0 = sys.density_from_preset(cfg.initial_state);
    let spec = cfg.model_spec(&sys, Model::TraceDecaying)?;
    let has_h = spec.hamiltonian().is_some();
    let mixture_defined = !has_h && spec.projectors().triplet_weight(rho0.matrix()) > 1e-12;

    let early = if has_h { None } else { Some(early_time_check(&rho0, &spec, cfg.dt)?) };

    let grid = cfg.grid()?;
    let oracle = |model: Model| -> Result<Option<f64>, CliError> {
        if has_h || (model == Model::Mixture && !mixture_defined) {
            return Ok(None);
        }
        let spec = spec.with_model(model)?;
        let sol = integrate(&rho0, &spec, &grid)?;
        Ok(Some(oracle_max_error(&sol, &rho0, &spec)?))
    };

    // Monte Carlo up to t = 1/k_s (or t_max, if shorter), recorded only at the end.
    let t_eval = (1.0 / cfg.k_s).min(cfg.t_max);
    let mc_steps = ((t_eval / cfg.mc_dt).round() as usize).max(1);
    let t_eval = mc_steps as f64 * cfg.mc_dt;
    let mut tcfg = cfg.trajectory_config();
    tcfg.t_max = t_eval;
    tcfg.record_stride = mc_steps;
    let est = run_ensemble_with(&rho0, &spec, &tcfg, exec)?;
    let last = est.times.len() - 1;

    let reference = |model: Model| -> Result<Option<f64>, CliError> {
        if model == Model::Mixture && !mixture_defined {
            return Ok(None);
        }
        let spec = spec.with_model(model)?;
        let ref_grid = TimeGrid::new(t_eval, cfg.dt.min(t_eval), usize::MAX)?;
        let sol = integrate(&rho0, &spec, &ref_grid)?;
        Ok(Some(singlet_probability(spec.projectors(), sol.states.last().unwrap())?))
    };
    let sigma = |r: Option<f64>| -> Option<f64> {
        let ps = est.p_singlet_nr[last]?;
        let se = est.p_singlet_nr_se[last]?;
        let r = r?;
        Some(if se > 0.0 {
            (ps - r).abs() / se
        } else if (ps - r).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        })
    };

    Ok(CheckSummary {
        defect_eq2: early.as_ref().map(|e| e.defect_normalized),
        defect_eq3: early.as_ref().and_then(|e| e.defect_mixture),
        recombined_fraction_x: early.as_ref().map(|e| e.recombined_fraction),
        oracle_max_error_eq1: oracle(Model::TraceDecaying)?,
        oracle_max_error_eq2: oracle(Model::Normalized)?,
        oracle_max_error_eq3: oracle(Model::Mixture)?,
        mc_vs_eq2_sigma: sigma(reference(Model::Normalized)?),
        mc_vs_eq3_sigma: sigma(reference(Model::Mixture)?),
    })
}

pub fn check_json(cfg: &RunConfig, exec: Execution) -> Result<String, CliError> {
    let summary = check(cfg, exec)?;
    // JSON has no infinity; a zero-variance mismatch is reported as a very large sigma.
    let clean = |v: Option<f64>| v.map(|x| if x.is_finite() { x } else { f64::MAX });
    let summary = CheckSummary {
        mc_vs_eq2_sigma: clean(summary.mc_vs_eq2_sigma),
        mc_vs_eq3_sigma: clean(summary.mc_vs_eq3_sigma),
        ..summary
    };
    let mut s = serde_json::to_string_pretty(&summary).expect("plain struct serializes");
    s.push('\n');
    Ok(s)
}
