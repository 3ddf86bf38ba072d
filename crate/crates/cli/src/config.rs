//! TOML run configuration.
//!
//! ```toml
//! [system]
//! n_nuclei = 0
//!
//! [model]
//! k_s = 1.0
//! initial_state = "ud"
//!
//! [model.hamiltonian]       # optional
//! kind = "zeeman"
//! omega = [0.5, -0.5]       # per-electron angular frequencies
//!
//! [run]
//! t_max = 5.0
//! dt = 1e-3
//! stride = 10
//!
//! [mc]
//! n_traj = 100000
//! dt = 1e-3
//! seed = 42
//!
//! [output]
//! path = "out.csv"
//! ```
//!
//! Unknown keys are rejected. Validation errors name the offending line.

use std::path::PathBuf;

use serde::Deserialize;
use toml::Spanned;

use radpair_core::master::TimeGrid;
use radpair_core::spin::{Axis, OperatorMatrix};
use radpair_core::trajectory::{TrajectoryConfig, MAX_JUMP_STEP};
use radpair_core::{Model, ModelSpec, Preset, SpinSystem};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    system: RawSystem,
    model: RawModel,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    mc: RawMc,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    n_nuclei: Option<Spanned<i64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    k_s: Spanned<f64>,
    initial_state: Option<Spanned<String>>,
    hamiltonian: Option<Spanned<RawHamiltonian>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHamiltonian {
    kind: Spanned<String>,
    omega: Spanned<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    t_max: Option<Spanned<f64>>,
    dt: Option<Spanned<f64>>,
    stride: Option<Spanned<i64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMc {
    n_traj: Option<Spanned<i64>>,
    dt: Option<Spanned<f64>>,
    seed: Option<Spanned<i64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zeeman {
    pub omega: [f64; 2],
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_nuclei: usize,
    pub k_s: f64,
    pub initial_state: Preset,
    pub hamiltonian: Option<Zeeman>,
    pub t_max: f64,
    pub dt: f64,
    pub stride: usize,
    pub n_traj: usize,
    pub mc_dt: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn err<T>(&self, span: std::ops::Range<usize>, key: &str, msg: impl std::fmt::Display) -> Result<T, CliError> {
        Err(CliError::Config(format!("line {}: {key}: {msg}", line_of(self.src, span.start))))
    }
}

impl RunConfig {
    pub fn from_toml(src: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| format!("line {}: ", line_of(src, s.start))).unwrap_or_default();
            CliError::Config(format!("{line}{}", e.message()))
        })?;
        let cx = Ctx { src };

        let n_nuclei = match &raw.system.n_nuclei {
            None => 0,
            Some(v) => {
                let n = *v.get_ref();
                if !(0..=radpair_core::spin::MAX_NUCLEI as i64).contains(&n) {
                    return cx.err(v.span(), "system.n_nuclei", format!("must lie in 0..=10, got {n}"));
                }
                n as usize
            }
        };

        let k_s = *raw.model.k_s.get_ref();
        if !(k_s > 0.0 && k_s.is_finite()) {
            return cx.err(raw.model.k_s.span(), "model.k_s", format!("must be positive, got {k_s}"));
        }

        let initial_state = match &raw.model.initial_state {
            None => Preset::UpDown,
            Some(v) => match v.get_ref().parse::<Preset>() {
                Ok(p) => p,
                Err(e) => return cx.err(v.span(), "model.initial_state", e),
            },
        };

        let hamiltonian = match &raw.model.hamiltonian {
            None => None,
            Some(h) => {
                let h = h.get_ref();
                if h.kind.get_ref() != "zeeman" {
                    return cx.err(h.kind.span(), "model.hamiltonian.kind", format!("unknown builder {:?}", h.kind.get_ref()));
                }
                let omega = h.omega.get_ref();
                if omega.len() != 2 || omega.iter().any(|w| !w.is_finite()) {
                    return cx.err(h.omega.span(), "model.hamiltonian.omega", "expected two finite frequencies");
                }
                Some(Zeeman { omega: [omega[0], omega[1]] })
            }
        };

        let positive = |v: &Option<Spanned<f64>>, key: &str, default: f64| -> Result<f64, CliError> {
            match v {
                None => Ok(default),
                Some(s) if *s.get_ref() > 0.0 && s.get_ref().is_finite() => Ok(*s.get_ref()),
                Some(s) => cx.err(s.span(), key, format!("must be positive, got {}", s.get_ref())),
            }
        };
        let count = |v: &Option<Spanned<i64>>, key: &str, default: usize| -> Result<usize, CliError> {
            match v {
                None => Ok(default),
                Some(s) if *s.get_ref() >= 1 => Ok(*s.get_ref() as usize),
                Some(s) => cx.err(s.span(), key, format!("must be at least 1, got {}", s.get_ref())),
            }
        };

        let t_max = positive(&raw.run.t_max, "run.t_max", 5.0 / k_s)?;
        let dt = positive(&raw.run.dt, "run.dt", 1e-3 / k_s)?;
        let stride = count(&raw.run.stride, "run.stride", 10)?;
        if let Err(e) = TimeGrid::new(t_max, dt, stride) {
            let span = raw.run.dt.as_ref().or(raw.run.t_max.as_ref()).map(|s| s.span()).unwrap_or(0..0);
            return cx.err(span, "run", e);
        }

        let n_traj = count(&raw.mc.n_traj, "mc.n_traj", 100_000)?;
        let mc_dt = positive(&raw.mc.dt, "mc.dt", 1e-3 / k_s)?;
        if k_s * mc_dt > MAX_JUMP_STEP * (1.0 + 1e-12) {
            let span = raw.mc.dt.as_ref().map(|s| s.span()).unwrap_or_else(|| raw.model.k_s.span());
            return cx.err(span, "mc.dt", format!("k_s*dt = {} exceeds {MAX_JUMP_STEP}", k_s * mc_dt));
        }
        if mc_dt > t_max {
            let span = raw.mc.dt.as_ref().map(|s| s.span()).unwrap_or(0..0);
            return cx.err(span, "mc.dt", "must not exceed run.t_max");
        }
        let seed = match &raw.mc.seed {
            None => 42,
            Some(s) if *s.get_ref() >= 0 => *s.get_ref() as u64,
            Some(s) => return cx.err(s.span(), "mc.seed", "must be non-negative"),
        };

        Ok(Self {
            n_nuclei,
            k_s,
            initial_state,
            hamiltonian,
            t_max,
            dt,
            stride,
            n_traj,
            mc_dt,
            seed,
            output: raw.output.path.map(PathBuf::from),
        })
    }

    pub fn system(&self) -> Result<SpinSystem, CliError> {
        Ok(SpinSystem::new(self.n_nuclei)?)
    }

    /// Model specification for `model`, with the configured Hamiltonian.
    pub fn model_spec(&self, sys: &SpinSystem, model: Model) -> Result<ModelSpec, CliError> {
        let spec = ModelSpec::new(sys, model, self.k_s)?;
        Ok(match self.hamiltonian {
            Some(z) => spec.with_hamiltonian(zeeman(sys, z)?)?,
            None => spec,
        })
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        Ok(TimeGrid::new(self.t_max, self.dt, self.stride)?)
    }

    pub fn trajectory_config(&self) -> TrajectoryConfig {
        TrajectoryConfig {
            n_traj: self.n_traj,
            dt: self.mc_dt,
            t_max: self.t_max,
            seed: self.seed,
            record_stride: self.stride,
        }
    }
}

/// ω1·S1z + ω2·S2z.
fn zeeman(sys: &SpinSystem, z: Zeeman) -> Result<OperatorMatrix, CliError> {
    let s1 = sys.spin_operator(0, Axis::Z)?.into_matrix().scale(z.omega[0]);
    let s2 = sys.spin_operator(1, Axis::Z)?.into_matrix().scale(z.omega[1]);
    Ok(OperatorMatrix::from_matrix(s1 + s2)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::from_toml("[model]\nk_s = 2.0\n").unwrap();
        assert_eq!(cfg.n_nuclei, 0);
        assert_eq!(cfg.initial_state, Preset::UpDown);
        assert_eq!(cfg.t_max, 2.5);
        assert_eq!(cfg.dt, 5e-4);
        assert_eq!(cfg.stride, 10);
        assert_eq!(cfg.n_traj, 100_000);
        assert_eq!(cfg.mc_dt, 5e-4);
        assert_eq!(cfg.seed, 42);
        assert!(cfg.output.is_none());
        assert!(cfg.hamiltonian.is_none());
    }

    #[test]
    fn full_file() {
        let src = r#"
[system]
n_nuclei = 1

[model]
k_s = 1.0
initial_state = "mixed"

[model.hamiltonian]
kind = "zeeman"
omega = [0.5, -0.5]

[run]
t_max = 2.0
dt = 1e-3
stride = 5

[mc]
n_traj = 1000
dt = 2e-3
seed = 7

[output]
path = "x.csv"
"#;
        let cfg = RunConfig::from_toml(src).unwrap();
        assert_eq!(cfg.n_nuclei, 1);
        assert_eq!(cfg.initial_state, Preset::Mixed);
        assert_eq!(cfg.hamiltonian, Some(Zeeman { omega: [0.5, -0.5] }));
        assert_eq!(cfg.output, Some(PathBuf::from("x.csv")));
        let sys = cfg.system().unwrap();
        let spec = cfg.model_spec(&sys, Model::Normalized).unwrap();
        assert!(spec.hamiltonian().is_some());
        assert!(cfg.model_spec(&sys, Model::Mixture).is_err());
    }

    fn message(src: &str) -> String {
        match RunConfig::from_toml(src) {
            Err(CliError::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_line() {
        assert!(message("[model]\nk_s = -1.0\n").starts_with("line 2: model.k_s"));
        assert!(message("[model]\nk_s = 1.0\ninitial_state = \"Q\"\n").starts_with("line 3"));
        assert!(message("[model]\nk_s = 1.0\n[mc]\ndt = 0.5\n").starts_with("line 4: mc.dt"));
        assert!(message("[model]\nk_s = 1.0\n[system]\nn_nuclei = 11\n").starts_with("line 4"));
        let unknown = message("[model]\nk_s = 1.0\nk_t = 0.0\n");
        assert!(unknown.starts_with("line 3"), "{unknown}");
        assert!(message("[model]\n").contains("k_s"));
        assert!(message("[model]\nk_s = 1.0\n[run]\nstride = 0\n").starts_with("line 4: run.stride"));
        assert!(message("[model]\nk_s = 1.0\n[model.hamiltonian]\nkind = \"exchange\"\nomega = [1.0, 1.0]\n").starts_with("line 4"));
    }
}
