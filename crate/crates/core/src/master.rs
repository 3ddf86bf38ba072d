//! Master equations for singlet-only recombination (k_T = 0).
//!
//! Three right-hand sides are provided:
//!
//! * [`Model::TraceDecaying`]: dρ/dt = −i[H,ρ] − k_S(ρ − QT ρ QT). The trace is
//!   the surviving population.
//! * [`Model::Normalized`]: the flow of ρ/Tr{ρ} under the trace-decaying
//!   equation, written division-free as
//!   −i[H,ρ] − k_S(ρ − QT ρ QT) + k_S·Tr{QS ρ}·ρ.
//! * [`Model::Mixture`]: dρ/dt = −k_S[ρ − QT ρ QT / Tr{QT ρ QT}], the
//!   stay-or-triplet-project mixture. Undefined for singlet-pure states and only
//!   defined without a Hamiltonian.
//!
//! Integration is fixed-step classical RK4 with re-symmetrization after each step.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spin::{
    hermiticity_defect, hermitian_eigenvalues, hermitize, max_abs, CMatrix, DensityMatrix,
    OperatorMatrix, Projectors, SpinSystem, C64, DENSITY_TOL, SINGULAR_CUTOFF,
};

/// Minimum eigenvalue tolerated along an integration before it is declared failed.
pub const PSD_FAILURE_TOL: f64 = 1e-8;

/// Largest input trace deviation accepted by the trace-preserving right-hand sides.
pub const TRACE_CONTRACT_TOL: f64 = 1e-6;

/// Initial-state trace tolerance for the trace-preserving models.
pub const INITIAL_TRACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    TraceDecaying,
    Normalized,
    Mixture,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::TraceDecaying, Model::Normalized, Model::Mixture];

    pub fn preserves_trace(self) -> bool {
        !matches!(self, Model::TraceDecaying)
    }
}

/// Rates, optional Hamiltonian and model selector, plus the shared projectors.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    k_s: f64,
    k_t: f64,
    hamiltonian: Option<OperatorMatrix>,
    model: Model,
    projectors: Arc<Projectors>,
}

impl ModelSpec {
    pub fn new(sys: &SpinSystem, model: Model, k_s: f64) -> Result<Self> {
        Self::with_projectors(Arc::new(sys.projectors()), model, k_s)
    }

    pub fn with_projectors(projectors: Arc<Projectors>, model: Model, k_s: f64) -> Result<Self> {
        if !(k_s > 0.0 && k_s.is_finite()) {
            return Err(Error::Config(format!("k_s must be positive and finite, got {k_s}")));
        }
        Ok(Self { k_s, k_t: 0.0, hamiltonian: None, model, projectors })
    }

    /// Only k_T = 0 is supported; any other value is rejected.
    pub fn with_triplet_rate(mut self, k_t: f64) -> Result<Self> {
        if k_t != 0.0 {
            return Err(Error::UnsupportedModel(format!(
                "triplet recombination rate must be 0, got {k_t}"
            )));
        }
        self.k_t = k_t;
        Ok(self)
    }

    pub fn with_hamiltonian(mut self, h: OperatorMatrix) -> Result<Self> {
        self.projectors.check_dim(h.dim())?;
        let defect = h.hermiticity_defect();
        if defect > DENSITY_TOL {
            return Err(Error::Config(format!("hamiltonian is not Hermitian (defect {defect:e})")));
        }
        self.hamiltonian = Some(h);
        self.check_model_combination()?;
        Ok(self)
    }

    pub fn with_model(&self, model: Model) -> Result<Self> {
        let mut spec = self.clone();
        spec.model = model;
        spec.check_model_combination()?;
        Ok(spec)
    }

    fn check_model_combination(&self) -> Result<()> {
        if self.model == Model::Mixture && self.hamiltonian.is_some() {
            return Err(Error::UnsupportedModel(
                "the mixture equation is only defined without a Hamiltonian".into(),
            ));
        }
        Ok(())
    }

    pub fn k_s(&self) -> f64 {
        self.k_s
    }

    pub fn k_t(&self) -> f64 {
        self.k_t
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn hamiltonian(&self) -> Option<&OperatorMatrix> {
        self.hamiltonian.as_ref()
    }

    pub fn projectors(&self) -> &Projectors {
        &self.projectors
    }

    pub fn shared_projectors(&self) -> Arc<Projectors> {
        Arc::clone(&self.projectors)
    }

    pub fn dim(&self) -> usize {
        self.projectors.dim()
    }

    fn require_no_hamiltonian(&self, what: &str) -> Result<()> {
        if self.hamiltonian.is_some() {
            return Err(Error::UnsupportedModel(format!("{what} requires the Hamiltonian to be absent")));
        }
        Ok(())
    }

    // −i[H,ρ], or None without a Hamiltonian.
    fn unitary_part(&self, rho: &CMatrix) -> Option<CMatrix> {
        self.hamiltonian.as_ref().map(|h| {
            let comm = &h.0 * rho - rho * &h.0;
            comm * C64::new(0.0, -1.0)
        })
    }

    fn traced_raw(&self, rho: &CMatrix) -> CMatrix {
        let mut out = (rho - self.projectors.sandwich_triplet(rho)).scale(-self.k_s);
        if let Some(u) = self.unitary_part(rho) {
            out += u;
        }
        out
    }

    fn normalized_raw(&self, rho: &CMatrix) -> CMatrix {
        let ps = self.projectors.singlet_weight(rho);
        self.traced_raw(rho) + rho.scale(self.k_s * ps)
    }

    fn mixture_raw(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.require_no_hamiltonian("the mixture equation")?;
        let sandwich = self.projectors.sandwich_triplet(rho);
        let weight = sandwich.trace().re;
        if weight <= SINGULAR_CUTOFF {
            return Err(Error::SingularProjection { weight });
        }
        Ok((rho - sandwich.unscale(weight)).scale(-self.k_s))
    }

    fn rhs_raw(&self, rho: &CMatrix) -> Result<CMatrix> {
        match self.model {
            Model::TraceDecaying => Ok(self.traced_raw(rho)),
            Model::Normalized => Ok(self.normalized_raw(rho)),
            Model::Mixture => self.mixture_raw(rho),
        }
    }
}

/// −i[H,ρ] − k_S(ρ − QT ρ QT). Its trace is −k_S·Tr{QS ρ}.
pub fn rhs_traced(rho: &DensityMatrix, spec: &ModelSpec) -> Result<OperatorMatrix> {
    spec.projectors.check_dim(rho.dim())?;
    Ok(OperatorMatrix(spec.traced_raw(rho.matrix())))
}

/// Division-free normalized flow; traceless for unit-trace input.
pub fn rhs_normalized(rho: &DensityMatrix, spec: &ModelSpec) -> Result<OperatorMatrix> {
    spec.projectors.check_dim(rho.dim())?;
    let tr = rho.trace();
    if (tr - 1.0).abs() > TRACE_CONTRACT_TOL {
        return Err(Error::Contract(format!("normalized flow needs unit trace, got {tr}")));
    }
    Ok(OperatorMatrix(spec.normalized_raw(rho.matrix())))
}

/// −k_S[ρ − QT ρ QT / Tr{QT ρ QT}].
pub fn rhs_mixture(rho: &DensityMatrix, spec: &ModelSpec) -> Result<OperatorMatrix> {
    spec.projectors.check_dim(rho.dim())?;
    spec.mixture_raw(rho.matrix()).map(OperatorMatrix)
}

/// Right-hand side of whichever model `spec` selects.
pub fn rhs(rho: &DensityMatrix, spec: &ModelSpec) -> Result<OperatorMatrix> {
    match spec.model {
        Model::TraceDecaying => rhs_traced(rho, spec),
        Model::Normalized => rhs_normalized(rho, spec),
        Model::Mixture => rhs_mixture(rho, spec),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    dt: f64,
    stride: usize,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, dt: f64, stride: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::Config(format!("t_max must be positive, got {t_max}")));
        }
        if !(dt > 0.0 && dt <= t_max) {
            return Err(Error::Config(format!("dt must lie in (0, t_max], got {dt}")));
        }
        if stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        let steps = (t_max / dt).round() as usize;
        if steps == 0 {
            return Err(Error::Config("grid has no steps".into()));
        }
        Ok(Self { t_max, dt, stride, steps })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Step indices at which the state is recorded: 0, every `stride`, and the last step.
    pub fn record_steps(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (0..=self.steps).step_by(self.stride).collect();
        if *out.last().unwrap() != self.steps {
            out.push(self.steps);
        }
        out
    }

    pub fn record_times(&self) -> Vec<f64> {
        self.record_steps().into_iter().map(|s| s as f64 * self.dt).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

fn check_initial(rho0: &DensityMatrix, spec: &ModelSpec) -> Result<()> {
    spec.projectors.check_dim(rho0.dim())?;
    if spec.model.preserves_trace() && (rho0.trace() - 1.0).abs() > INITIAL_TRACE_TOL {
        return Err(Error::Contract(format!(
            "trace-preserving model needs a unit-trace initial state, got {}",
            rho0.trace()
        )));
    }
    Ok(())
}

/// Fixed-step RK4 on the model selected by `spec`.
pub fn integrate(rho0: &DensityMatrix, spec: &ModelSpec, grid: &TimeGrid) -> Result<Solution> {
    check_initial(rho0, spec)?;
    let h = grid.dt();
    let record = grid.record_steps();
    let mut next_record = 1;
    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    let mut y = rho0.matrix().clone();

    for step in 1..=grid.steps() {
        let t = step as f64 * h;
        let k1 = spec.rhs_raw(&y)?;
        let k2 = spec.rhs_raw(&(&y + k1.scale(0.5 * h)))?;
        let k3 = spec.rhs_raw(&(&y + k2.scale(0.5 * h)))?;
        let k4 = spec.rhs_raw(&(&y + k3.scale(h)))?;
        y += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);

        let defect = hermiticity_defect(&y);
        if !(defect <= PSD_FAILURE_TOL) {
            return Err(Error::NumericalFailure {
                time: t,
                reason: format!("hermiticity defect {defect:e}"),
            });
        }
        y = hermitize(&y);

        if next_record < record.len() && record[next_record] == step {
            next_record += 1;
            let min_ev = hermitian_eigenvalues(&y)[0];
            if !(min_ev >= -PSD_FAILURE_TOL) {
                return Err(Error::NumericalFailure {
                    time: t,
                    reason: format!("minimum eigenvalue {min_ev:e}"),
                });
            }
            times.push(t);
            states.push(DensityMatrix::from_matrix_unchecked(y.clone()));
        }
    }
    Ok(Solution { times, states })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureWeights {
    /// Probability of still being in the initial state.
    pub w0: f64,
    /// Probability of having been triplet-projected.
    pub w_t: f64,
}

pub fn mixture_weights(k_s: f64, t: f64) -> Result<MixtureWeights> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    if !(k_s > 0.0) {
        return Err(Error::Domain(format!("k_s must be positive, got {k_s}")));
    }
    let x = -k_s * t;
    Ok(MixtureWeights { w0: x.exp(), w_t: -x.exp_m1() })
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    Ok(())
}

/// Closed form of the trace-decaying equation without a Hamiltonian:
/// ρ(t) = e^{−k_S t}(ρ0 − QT ρ0 QT) + QT ρ0 QT.
pub fn analytic_traced(rho0: &DensityMatrix, spec: &ModelSpec, t: f64) -> Result<DensityMatrix> {
    check_time(t)?;
    spec.require_no_hamiltonian("the closed-form solution")?;
    spec.projectors.check_dim(rho0.dim())?;
    let rho0 = rho0.matrix();
    let decaying = rho0 - spec.projectors.sandwich_triplet(rho0);
    // Written as ρ0 + (e^{−kt} − 1)·decaying so that t = 0 returns ρ0 exactly.
    let m = (-spec.k_s * t).exp_m1();
    Ok(DensityMatrix::from_matrix_unchecked(hermitize(&(rho0 + decaying.scale(m)))))
}

/// The trace-decaying closed form divided by its trace.
pub fn analytic_normalized(rho0: &DensityMatrix, spec: &ModelSpec, t: f64) -> Result<DensityMatrix> {
    let traced = analytic_traced(rho0, spec, t)?;
    let tr = traced.trace();
    if !(tr > SINGULAR_CUTOFF) {
        return Err(Error::Domain(format!("surviving trace {tr:e} vanishes")));
    }
    Ok(DensityMatrix::from_matrix_unchecked(traced.into_matrix().unscale(tr)))
}

/// w0·ρ0 + w_T·ρ_T with w0 = e^{−k_S t} and ρ_T the triplet-projected initial state.
pub fn analytic_mixture(rho0: &DensityMatrix, spec: &ModelSpec, t: f64) -> Result<DensityMatrix> {
    spec.require_no_hamiltonian("the mixture equation")?;
    let weights = mixture_weights(spec.k_s, t)?;
    let projected = crate::spin::conditional_projected_state(rho0, spec.projectors.triplet())?;
    let m = rho0.matrix().scale(weights.w0) + projected.matrix().scale(weights.w_t);
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Closed form of whichever model `spec` selects.
pub fn analytic(rho0: &DensityMatrix, spec: &ModelSpec, t: f64) -> Result<DensityMatrix> {
    match spec.model {
        Model::TraceDecaying => analytic_traced(rho0, spec, t),
        Model::Normalized => analytic_normalized(rho0, spec, t),
        Model::Mixture => analytic_mixture(rho0, spec, t),
    }
}

/// Largest entrywise deviation between an integrated solution and the closed form.
pub fn oracle_max_error(solution: &Solution, rho0: &DensityMatrix, spec: &ModelSpec) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (t, state) in solution.times.iter().zip(&solution.states) {
        let exact = analytic(rho0, spec, *t)?;
        worst = worst.max(max_abs(&(state.matrix() - exact.matrix())));
    }
    Ok(worst)
}
