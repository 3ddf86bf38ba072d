//! Quantum-jump ensembles for singlet-only recombination.
//!
//! Each molecule is advanced in steps of `dt`. With state σ and one uniform
//! draw u ∈ [0,1), the outcome intervals are laid out in the fixed order
//! `[p_S | p_T | p_0]`:
//!
//! * u < p_S = k_S·dt·Tr{QS σ}: the molecule recombines and leaves the ensemble,
//! * u < p_S + p_T with p_T = k_S·dt·Tr{QT σ}: σ is replaced by QT σ QT / Tr{QT σ QT},
//! * otherwise nothing happens (a unitary drift e^{−iH dt} is applied when a
//!   Hamiltonian is present).
//!
//! The scheme is first order in `dt`; `k_S·dt` is capped at [`MAX_JUMP_STEP`].
//!
//! Molecule `i` draws from `ChaCha8Rng::seed_from_u64(seed)` with stream `i`,
//! and statistics are reduced over fixed chunks of molecules in index order,
//! so serial and parallel runs produce bit-identical estimates.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::master::{ModelSpec, TimeGrid, INITIAL_TRACE_TOL};
use crate::spin::{hermitize, CMatrix, DensityMatrix, OperatorMatrix, Projectors, C64};

/// Upper bound on k_S·dt for the jump scheme.
pub const MAX_JUMP_STEP: f64 = 0.01;

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpProbabilities {
    pub p0: f64,
    pub p_s: f64,
    pub p_t: f64,
}

fn check_step(k_s: f64, dt: f64) -> Result<()> {
    let product = k_s * dt;
    if !(dt > 0.0) {
        return Err(Error::Config(format!("jump step must be positive, got {dt}")));
    }
    if product > MAX_JUMP_STEP * (1.0 + 1e-12) {
        return Err(Error::StepSize { product, cap: MAX_JUMP_STEP });
    }
    Ok(())
}

pub fn jump_probabilities(sigma: &DensityMatrix, spec: &ModelSpec, dt: f64) -> Result<JumpProbabilities> {
    check_step(spec.k_s(), dt)?;
    let tr = sigma.trace();
    if (tr - 1.0).abs() > INITIAL_TRACE_TOL {
        return Err(Error::Contract(format!("jump probabilities need a unit-trace state, got {tr}")));
    }
    let p = spec.projectors();
    Ok(probabilities_from_weights(
        spec.k_s() * dt,
        p.singlet_weight(sigma.matrix()),
        p.triplet_weight(sigma.matrix()),
    ))
}

fn probabilities_from_weights(kdt: f64, singlet: f64, triplet: f64) -> JumpProbabilities {
    // Weights can exceed [0, 1] by roundoff.
    let p_s = kdt * singlet.clamp(0.0, 1.0);
    let p_t = kdt * triplet.clamp(0.0, 1.0);
    JumpProbabilities { p0: 1.0 - p_s - p_t, p_s, p_t }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Recombine,
    Project,
    Stay,
}

fn choose(draw: f64, probs: &JumpProbabilities) -> Outcome {
    if draw < probs.p_s {
        Outcome::Recombine
    } else if draw < probs.p_s + probs.p_t {
        Outcome::Project
    } else {
        Outcome::Stay
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MoleculeState {
    /// `jumps` counts triplet projections so far.
    Unrecombined { state: DensityMatrix, jumps: u32 },
    /// Tombstone; `at_time` is the end of the step in which recombination happened.
    Recombined { at_time: f64 },
}

impl MoleculeState {
    pub fn fresh(state: DensityMatrix) -> Self {
        MoleculeState::Unrecombined { state, jumps: 0 }
    }

    pub fn is_recombined(&self) -> bool {
        matches!(self, MoleculeState::Recombined { .. })
    }
}

/// Per-step machinery shared by [`step_once`] and the ensemble engine.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    projectors: &'a Projectors,
    kdt: f64,
    dt: f64,
    drift: Option<CMatrix>,
}

impl<'a> Stepper<'a> {
    pub fn new(spec: &'a ModelSpec, dt: f64) -> Result<Self> {
        check_step(spec.k_s(), dt)?;
        let drift = spec.hamiltonian().map(|h| unitary_propagator(h, dt));
        Ok(Self { projectors: spec.projectors(), kdt: spec.k_s() * dt, dt, drift })
    }

    /// Advances one molecule over [t, t + dt] using `draw` ∈ [0,1).
    pub fn step(&self, m: &MoleculeState, t: f64, draw: f64) -> MoleculeState {
        let MoleculeState::Unrecombined { state, jumps } = m else {
            return m.clone();
        };
        let rho = state.matrix();
        let probs = probabilities_from_weights(
            self.kdt,
            self.projectors.singlet_weight(rho),
            self.projectors.triplet_weight(rho),
        );
        match choose(draw, &probs) {
            Outcome::Recombine => MoleculeState::Recombined { at_time: t + self.dt },
            Outcome::Project => MoleculeState::Unrecombined {
                state: DensityMatrix::from_matrix_unchecked(self.project(rho)),
                jumps: jumps + 1,
            },
            Outcome::Stay => match &self.drift {
                Some(u) => MoleculeState::Unrecombined {
                    state: DensityMatrix::from_matrix_unchecked(apply_drift(u, rho)),
                    jumps: *jumps,
                },
                None => m.clone(),
            },
        }
    }

    fn project(&self, rho: &CMatrix) -> CMatrix {
        let sandwich = self.projectors.sandwich_triplet(rho);
        let w = sandwich.trace().re;
        hermitize(&sandwich.unscale(w))
    }
}

/// Single step of the three-outcome scheme at time `t`.
pub fn step_once(m: &MoleculeState, spec: &ModelSpec, dt: f64, t: f64, draw: f64) -> Result<MoleculeState> {
    if !(0.0..1.0).contains(&draw) {
        return Err(Error::Domain(format!("draw must lie in [0,1), got {draw}")));
    }
    Ok(Stepper::new(spec, dt)?.step(m, t, draw))
}

fn unitary_propagator(h: &OperatorMatrix, dt: f64) -> CMatrix {
    let eig = hermitize(h.matrix()).symmetric_eigen();
    let phases = eig.eigenvalues.map(|l| C64::from_polar(1.0, -l * dt));
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&phases) * v.adjoint()
}

fn apply_drift(u: &CMatrix, rho: &CMatrix) -> CMatrix {
    hermitize(&(u * rho * u.adjoint()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub n_traj: usize,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub record_stride: usize,
}

impl TrajectoryConfig {
    pub fn validate(&self, k_s: f64) -> Result<TimeGrid> {
        if self.n_traj == 0 {
            return Err(Error::Config("n_traj must be at least 1".into()));
        }
        check_step(k_s, self.dt)?;
        TimeGrid::new(self.t_max, self.dt, self.record_stride)
    }
}

/// Raw ensemble sums at one recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSnapshot {
    pub time: f64,
    pub n_traj: u64,
    pub n_unrecombined: u64,
    /// Unrecombined molecules that were never projected.
    pub n_never_projected: u64,
    sum_state: CMatrix,
    sum_sq_re: DMatrix<f64>,
    sum_sq_im: DMatrix<f64>,
    sum_ps: f64,
    sum_ps_sq: f64,
}

impl EnsembleSnapshot {
    fn empty(time: f64, dim: usize) -> Self {
        Self {
            time,
            n_traj: 0,
            n_unrecombined: 0,
            n_never_projected: 0,
            sum_state: CMatrix::zeros(dim, dim),
            sum_sq_re: DMatrix::zeros(dim, dim),
            sum_sq_im: DMatrix::zeros(dim, dim),
            sum_ps: 0.0,
            sum_ps_sq: 0.0,
        }
    }

    fn add_unrecombined(&mut self, rho: &CMatrix, ps: f64, never_projected: bool) {
        self.n_unrecombined += 1;
        self.n_never_projected += u64::from(never_projected);
        self.sum_state += rho;
        for (acc, z) in self.sum_sq_re.iter_mut().zip(rho.iter()) {
            *acc += z.re * z.re;
        }
        for (acc, z) in self.sum_sq_im.iter_mut().zip(rho.iter()) {
            *acc += z.im * z.im;
        }
        self.sum_ps += ps;
        self.sum_ps_sq += ps * ps;
    }

    fn merge(&mut self, other: &EnsembleSnapshot) {
        self.n_traj += other.n_traj;
        self.n_unrecombined += other.n_unrecombined;
        self.n_never_projected += other.n_never_projected;
        self.sum_state += &other.sum_state;
        self.sum_sq_re += &other.sum_sq_re;
        self.sum_sq_im += &other.sum_sq_im;
        self.sum_ps += other.sum_ps;
        self.sum_ps_sq += other.sum_ps_sq;
    }

    pub fn survival(&self) -> f64 {
        self.n_unrecombined as f64 / self.n_traj as f64
    }

    pub fn survival_se(&self) -> f64 {
        let p = self.survival();
        (p * (1.0 - p) / self.n_traj as f64).sqrt()
    }

    /// Conditional mean over unrecombined molecules; `None` once all recombined.
    pub fn conditional_mean(&self) -> Option<DensityMatrix> {
        (self.n_unrecombined > 0).then(|| {
            DensityMatrix::from_matrix_unchecked(self.sum_state.unscale(self.n_unrecombined as f64))
        })
    }

    pub fn p_singlet_nr(&self) -> Option<f64> {
        (self.n_unrecombined > 0).then(|| self.sum_ps / self.n_unrecombined as f64)
    }

    pub fn p_singlet_nr_se(&self) -> Option<f64> {
        (self.n_unrecombined > 0).then(|| {
            standard_error(self.sum_ps, self.sum_ps_sq, self.n_unrecombined as f64)
        })
    }

    pub fn w0_frac(&self) -> Option<f64> {
        (self.n_unrecombined > 0).then(|| self.n_never_projected as f64 / self.n_unrecombined as f64)
    }

    /// Entrywise standard errors (real, imaginary parts) of [`unnormalized_mean`].
    pub fn unnormalized_se(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n_traj as f64;
        let re = DMatrix::from_fn(self.sum_state.nrows(), self.sum_state.ncols(), |i, j| {
            standard_error(self.sum_state[(i, j)].re, self.sum_sq_re[(i, j)], n)
        });
        let im = DMatrix::from_fn(self.sum_state.nrows(), self.sum_state.ncols(), |i, j| {
            standard_error(self.sum_state[(i, j)].im, self.sum_sq_im[(i, j)], n)
        });
        (re, im)
    }
}

/// Standard error of a sample mean from its first two power sums.
fn standard_error(sum: f64, sum_sq: f64, n: f64) -> f64 {
    if n < 2.0 {
        return 0.0;
    }
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (var / n).sqrt()
}

/// Mean over all molecules with recombined ones counted as the zero matrix.
/// Its expectation is the trace-decaying solution.
pub fn unnormalized_mean(snapshot: &EnsembleSnapshot) -> OperatorMatrix {
    OperatorMatrix(snapshot.sum_state.unscale(snapshot.n_traj as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEstimate {
    pub times: Vec<f64>,
    pub n_unrecombined: Vec<u64>,
    pub survival_frac: Vec<f64>,
    pub survival_se: Vec<f64>,
    pub rho_nr_est: Vec<Option<DensityMatrix>>,
    pub p_singlet_nr: Vec<Option<f64>>,
    pub p_singlet_nr_se: Vec<Option<f64>>,
    pub w0_frac: Vec<Option<f64>>,
    pub snapshots: Vec<EnsembleSnapshot>,
    /// Recombination time of each molecule, by index; `None` if it survived.
    pub lifetimes: Vec<Option<f64>>,
}

impl EnsembleEstimate {
    fn from_snapshots(snapshots: Vec<EnsembleSnapshot>, lifetimes: Vec<Option<f64>>) -> Self {
        Self {
            times: snapshots.iter().map(|s| s.time).collect(),
            n_unrecombined: snapshots.iter().map(|s| s.n_unrecombined).collect(),
            survival_frac: snapshots.iter().map(EnsembleSnapshot::survival).collect(),
            survival_se: snapshots.iter().map(EnsembleSnapshot::survival_se).collect(),
            rho_nr_est: snapshots.iter().map(EnsembleSnapshot::conditional_mean).collect(),
            p_singlet_nr: snapshots.iter().map(EnsembleSnapshot::p_singlet_nr).collect(),
            p_singlet_nr_se: snapshots.iter().map(EnsembleSnapshot::p_singlet_nr_se).collect(),
            w0_frac: snapshots.iter().map(EnsembleSnapshot::w0_frac).collect(),
            snapshots,
            lifetimes,
        }
    }

    /// Index of the recorded time closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

struct Engine<'a> {
    stepper: Stepper<'a>,
    projectors: &'a Projectors,
    rho0: &'a DensityMatrix,
    seed: u64,
    steps: usize,
    record_steps: Vec<usize>,
    dt: f64,
}

struct ChunkResult {
    snapshots: Vec<EnsembleSnapshot>,
    lifetimes: Vec<Option<f64>>,
}

impl Engine<'_> {
    fn empty_snapshots(&self) -> Vec<EnsembleSnapshot> {
        self.record_steps
            .iter()
            .map(|&s| EnsembleSnapshot::empty(s as f64 * self.dt, self.rho0.dim()))
            .collect()
    }

    fn run_chunk(&self, range: std::ops::Range<usize>) -> ChunkResult {
        let mut snapshots = self.empty_snapshots();
        let mut lifetimes = Vec::with_capacity(range.len());
        for index in range {
            for snap in &mut snapshots {
                snap.n_traj += 1;
            }
            lifetimes.push(self.run_molecule(index, &mut snapshots));
        }
        ChunkResult { snapshots, lifetimes }
    }

    fn run_molecule(&self, index: usize, snapshots: &mut [EnsembleSnapshot]) -> Option<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);

        let mut rho = self.rho0.matrix().clone();
        let mut singlet = self.projectors.singlet_weight(&rho);
        let mut triplet = self.projectors.triplet_weight(&rho);
        let mut jumps = 0u32;
        let mut next = 0;

        for step in 0..=self.steps {
            if next < self.record_steps.len() && self.record_steps[next] == step {
                snapshots[next].add_unrecombined(&rho, singlet, jumps == 0);
                next += 1;
            }
            if step == self.steps {
                break;
            }
            let probs = probabilities_from_weights(self.stepper.kdt, singlet, triplet);
            match choose(rng.random::<f64>(), &probs) {
                Outcome::Recombine => return Some((step + 1) as f64 * self.dt),
                Outcome::Project => {
                    rho = self.stepper.project(&rho);
                    jumps += 1;
                }
                Outcome::Stay => match &self.stepper.drift {
                    Some(u) => rho = apply_drift(u, &rho),
                    None => continue,
                },
            }
            singlet = self.projectors.singlet_weight(&rho);
            triplet = self.projectors.triplet_weight(&rho);
        }
        None
    }
}

pub fn run_ensemble(rho0: &DensityMatrix, spec: &ModelSpec, cfg: &TrajectoryConfig) -> Result<EnsembleEstimate> {
    run_ensemble_with(rho0, spec, cfg, Execution::default())
}

/// Runs the ensemble; `exec` affects only scheduling, never the output.
pub fn run_ensemble_with(
    rho0: &DensityMatrix,
    spec: &ModelSpec,
    cfg: &TrajectoryConfig,
    exec: Execution,
) -> Result<EnsembleEstimate> {
    let grid = cfg.validate(spec.k_s())?;
    spec.projectors().check_dim(rho0.dim())?;
    let tr = rho0.trace();
    if (tr - 1.0).abs() > INITIAL_TRACE_TOL {
        return Err(Error::Contract(format!("ensemble needs a unit-trace initial state, got {tr}")));
    }
    let engine = Engine {
        stepper: Stepper::new(spec, cfg.dt)?,
        projectors: spec.projectors(),
        rho0,
        seed: cfg.seed,
        steps: grid.steps(),
        record_steps: grid.record_steps(),
        dt: cfg.dt,
    };

    let chunks: Vec<std::ops::Range<usize>> = (0..cfg.n_traj)
        .step_by(CHUNK)
        .map(|start| start..(start + CHUNK).min(cfg.n_traj))
        .collect();

    let results: Vec<ChunkResult> = match exec {
        Execution::Serial => chunks.into_iter().map(|r| engine.run_chunk(r)).collect(),
        Execution::Parallel => run_chunks_parallel(&engine, chunks),
    };

    let mut snapshots = engine.empty_snapshots();
    let mut lifetimes = Vec::with_capacity(cfg.n_traj);
    for chunk in results {
        for (acc, s) in snapshots.iter_mut().zip(&chunk.snapshots) {
            acc.merge(s);
        }
        lifetimes.extend(chunk.lifetimes);
    }
    Ok(EnsembleEstimate::from_snapshots(snapshots, lifetimes))
}

#[cfg(feature = "parallel")]
fn run_chunks_parallel(engine: &Engine<'_>, chunks: Vec<std::ops::Range<usize>>) -> Vec<ChunkResult> {
    use rayon::prelude::*;
    chunks.into_par_iter().map(|r| engine.run_chunk(r)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_chunks_parallel(engine: &Engine<'_>, chunks: Vec<std::ops::Range<usize>>) -> Vec<ChunkResult> {
    chunks.into_iter().map(|r| engine.run_chunk(r)).collect()
}
