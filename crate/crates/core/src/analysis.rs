//! Observables, model-to-model distances and the early-time consistency check.

use crate::error::{Error, Result};
use crate::master::{
    analytic_traced, integrate, rhs_mixture, rhs_normalized, Model, ModelSpec, TimeGrid,
};
use crate::spin::{hermitian_eigenvalues, max_abs, DensityMatrix, OperatorMatrix, Projectors, SINGULAR_CUTOFF};

/// Tr{QS ρ}/Tr{ρ}; sub-normalized states are renormalized first.
pub fn singlet_probability(projectors: &Projectors, rho: &DensityMatrix) -> Result<f64> {
    projectors.check_dim(rho.dim())?;
    let tr = rho.trace();
    if !(tr > SINGULAR_CUTOFF) {
        return Err(Error::Domain(format!("trace {tr:e} too small to normalize")));
    }
    Ok(projectors.singlet_weight(rho.matrix()) / tr)
}

/// k_S·Tr{QT ρ QT}: the rate at which a unit-trace state relaxes toward its
/// triplet projection under the normalized flow. Lies in [0, k_S].
pub fn effective_rate(projectors: &Projectors, rho_nr: &DensityMatrix, k_s: f64) -> f64 {
    (k_s * projectors.triplet_weight(rho_nr.matrix())).clamp(0.0, k_s)
}

/// ½·Σ|λ| over the eigenvalues of ρ1 − ρ2.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: a.dim(), got: b.dim() });
    }
    let diff = a.matrix() - b.matrix();
    Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>())
}

/// Per-time observables of all three models started from the same state.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    /// Surviving population under the trace-decaying equation.
    pub trace_traced: Vec<f64>,
    /// Singlet probability of the trace-decaying solution after normalization.
    pub p_singlet_traced: Vec<f64>,
    pub p_singlet_normalized: Vec<f64>,
    /// Absent when the mixture equation is undefined for the initial state or spec.
    pub p_singlet_mixture: Option<Vec<f64>>,
    pub dist_normalized_mixture: Option<Vec<f64>>,
    pub effective_rate_normalized: Vec<f64>,
}

pub fn compare_models(rho0: &DensityMatrix, spec: &ModelSpec, grid: &TimeGrid) -> Result<ComparisonReport> {
    let p = spec.projectors();
    let traced = integrate(rho0, &spec.with_model(Model::TraceDecaying)?, grid)?;
    let normalized = integrate(rho0, &spec.with_model(Model::Normalized)?, grid)?;

    let mixture_defined =
        spec.hamiltonian().is_none() && p.triplet_weight(rho0.matrix()) > SINGULAR_CUTOFF;
    let mixture = if mixture_defined {
        Some(integrate(rho0, &spec.with_model(Model::Mixture)?, grid)?)
    } else {
        None
    };

    let probs = |states: &[DensityMatrix]| -> Result<Vec<f64>> {
        states.iter().map(|r| singlet_probability(p, r)).collect()
    };
    let dist_normalized_mixture = match &mixture {
        Some(m) => Some(
            normalized
                .states
                .iter()
                .zip(&m.states)
                .map(|(a, b)| trace_distance(a, b))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };

    Ok(ComparisonReport {
        times: traced.times.clone(),
        trace_traced: traced.states.iter().map(DensityMatrix::trace).collect(),
        p_singlet_traced: probs(&traced.states)?,
        p_singlet_normalized: probs(&normalized.states)?,
        p_singlet_mixture: mixture.as_ref().map(|m| probs(&m.states)).transpose()?,
        dist_normalized_mixture,
        effective_rate_normalized: normalized
            .states
            .iter()
            .map(|r| effective_rate(p, r, spec.k_s()))
            .collect(),
    })
}

/// First-step comparison of the normalized trace-decaying flow against the
/// two trace-preserving right-hand sides.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyTimeReport {
    pub dt: f64,
    /// [ρ(dt)/Tr{ρ(dt)} − ρ0]/dt along the closed-form trace-decaying flow.
    pub fd_derivative: OperatorMatrix,
    pub rhs_normalized_at_0: OperatorMatrix,
    pub rhs_mixture_at_0: Option<OperatorMatrix>,
    /// Max-entry norm of fd_derivative − rhs_normalized_at_0.
    pub defect_normalized: f64,
    pub defect_mixture: Option<f64>,
    /// Fraction x of pairs recombined over the first step, 1 − Tr{ρ(dt)}.
    pub recombined_fraction: f64,
    /// Traceless change of the unrecombined pairs: ρ(dt) − (1 − x)·ρ0.
    pub unrecombined_change: OperatorMatrix,
}

/// Largest k_S·dt admitted by [`early_time_check`].
pub const EARLY_TIME_MAX_STEP: f64 = 1e-3;

pub fn early_time_check(rho0: &DensityMatrix, spec: &ModelSpec, dt: f64) -> Result<EarlyTimeReport> {
    if !(dt > 0.0) || spec.k_s() * dt > EARLY_TIME_MAX_STEP * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "early-time check needs 0 < k_s*dt <= {EARLY_TIME_MAX_STEP}, got {}",
            spec.k_s() * dt
        )));
    }
    let rho_dt = analytic_traced(rho0, spec, dt)?;
    let tr = rho_dt.trace();
    let recombined_fraction = 1.0 - tr;
    let unrecombined_change = rho_dt.matrix() - rho0.matrix().scale(1.0 - recombined_fraction);
    let fd = (rho_dt.matrix().unscale(tr) - rho0.matrix()).unscale(dt);

    let rhs_n = rhs_normalized(rho0, spec)?;
    let defect_normalized = max_abs(&(&fd - rhs_n.matrix()));
    let rhs_m = match rhs_mixture(rho0, spec) {
        Ok(m) => Some(m),
        Err(Error::SingularProjection { .. }) => None,
        Err(e) => return Err(e),
    };
    let defect_mixture = rhs_m.as_ref().map(|m| max_abs(&(&fd - m.matrix())));

    Ok(EarlyTimeReport {
        dt,
        fd_derivative: OperatorMatrix(fd),
        rhs_normalized_at_0: rhs_n,
        rhs_mixture_at_0: rhs_m,
        defect_normalized,
        defect_mixture,
        recombined_fraction,
        unrecombined_change: OperatorMatrix(unrecombined_change),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::master::{analytic_mixture, analytic_normalized};
    use crate::spin::{Preset, SpinSystem};

    fn setup() -> (SpinSystem, ModelSpec) {
        let sys = SpinSystem::new(0).unwrap();
        (sys, ModelSpec::new(&sys, Model::TraceDecaying, 1.0).unwrap())
    }

    #[test]
    fn singlet_probabilities() {
        let (sys, spec) = setup();
        let p = spec.projectors();
        let s = sys.density_from_preset(Preset::Singlet);
        assert!((singlet_probability(p, &s).unwrap() - 1.0).abs() < 1e-15);
        let ud = sys.density_from_preset(Preset::UpDown);
        assert!((singlet_probability(p, &ud).unwrap() - 0.5).abs() < 1e-15);
        let weak = s.scaled(0.3).unwrap();
        assert!((singlet_probability(p, &weak).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn effective_rates() {
        let (sys, spec) = setup();
        let p = spec.projectors();
        assert!((effective_rate(p, &sys.density_from_preset(Preset::UpDown), 1.0) - 0.5).abs() < 1e-15);
        assert!(effective_rate(p, &sys.density_from_preset(Preset::Singlet), 1.0).abs() < 1e-15);
        assert!((effective_rate(p, &sys.density_from_preset(Preset::T0), 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn effective_rate_grows_toward_k_s() {
        let (sys, spec) = setup();
        let ud = sys.density_from_preset(Preset::UpDown);
        let mut last = 0.0;
        for i in 0..=100 {
            let r = analytic_normalized(&ud, &spec, 0.1 * i as f64).unwrap();
            let k = effective_rate(spec.projectors(), &r, 1.0);
            assert!(k >= last - 1e-15 && k <= 1.0);
            last = k;
        }
        assert!(last > 0.9999);
    }

    #[test]
    fn trace_distances() {
        let (sys, spec) = setup();
        let s = sys.density_from_preset(Preset::Singlet);
        let t0 = sys.density_from_preset(Preset::T0);
        assert!(trace_distance(&s, &s).unwrap() < 1e-14);
        assert!((trace_distance(&s, &t0).unwrap() - 1.0).abs() < 1e-14);
        let ud = sys.density_from_preset(Preset::UpDown);
        let a = analytic_normalized(&ud, &spec, 1.0).unwrap();
        let b = analytic_mixture(&ud, &spec, 1.0).unwrap();
        // The difference is a·[[1, 1], [1, −1]] on the {S, T0} block, with eigenvalues ±√2·a.
        let e = (-1.0f64).exp();
        let expected = std::f64::consts::SQRT_2 * (e / (1.0 + e) - 0.5 * e);
        assert!((trace_distance(&a, &b).unwrap() - expected).abs() < 1e-6);
        assert!((expected - 0.1202106).abs() < 1e-7);
        let big = SpinSystem::new(1).unwrap().density_from_preset(Preset::T0);
        assert!(trace_distance(&s, &big).is_err());
    }

    #[test]
    fn comparison_rows() {
        let (sys, spec) = setup();
        let grid = TimeGrid::new(2.0, 1e-3, 100).unwrap();
        let ud = sys.density_from_preset(Preset::UpDown);
        let rep = compare_models(&ud, &spec, &grid).unwrap();
        let i = rep.times.iter().position(|&t| (t - 1.0).abs() < 1e-9).unwrap();
        assert!((rep.p_singlet_normalized[i] - 0.268941).abs() < 1e-6);
        assert!((rep.p_singlet_mixture.as_ref().unwrap()[i] - 0.183940).abs() < 1e-6);
        assert!((rep.trace_traced[i] - 0.683940).abs() < 1e-6);
        assert!(rep.dist_normalized_mixture.as_ref().unwrap()[0] < 1e-12);

        let t0 = compare_models(&sys.density_from_preset(Preset::T0), &spec, &grid).unwrap();
        assert!(t0.p_singlet_normalized.iter().all(|p| p.abs() < 1e-12));
        assert!(t0.p_singlet_mixture.unwrap().iter().all(|p| p.abs() < 1e-12));
        assert!(t0.dist_normalized_mixture.unwrap().iter().all(|d| d.abs() < 1e-12));

        let s = compare_models(&sys.density_from_preset(Preset::Singlet), &spec, &grid).unwrap();
        assert!(s.p_singlet_mixture.is_none());
        assert!(s.p_singlet_normalized.iter().all(|p| (p - 1.0).abs() < 1e-12));
    }

    #[test]
    fn early_time_examples() {
        let (sys, spec) = setup();
        let ud = sys.density_from_preset(Preset::UpDown);
        let rep = early_time_check(&ud, &spec, 1e-4).unwrap();
        assert!(rep.defect_normalized < 1e-3);
        let d3 = rep.defect_mixture.unwrap();
        assert!((d3 - 0.25).abs() < 1e-3, "{d3}");
        assert!((rep.recombined_fraction - 5.0e-5).abs() < 1e-8);
        for m in [&rep.fd_derivative, &rep.rhs_normalized_at_0, rep.rhs_mixture_at_0.as_ref().unwrap(), &rep.unrecombined_change] {
            assert!(m.trace().norm() < 1e-9);
        }

        let s = early_time_check(&sys.density_from_preset(Preset::Singlet), &spec, 1e-4).unwrap();
        assert!(s.defect_mixture.is_none());
        assert!(early_time_check(&ud, &spec, 1e-2).is_err());
    }
}
