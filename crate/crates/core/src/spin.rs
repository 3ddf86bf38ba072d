//! Spin Hilbert spaces, spin-½ operators, singlet/triplet projectors and
//! density matrices.
//!
//! The product basis is lexicographic with ↑ before ↓ and the site order is
//! fixed: electron 1, electron 2, then nuclei in index order. For the bare
//! pair the basis reads |↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Largest supported number of spin-½ nuclei (dimension 4096).
pub const MAX_NUCLEI: usize = 10;

/// Default tolerance for the density-matrix invariants.
pub const DENSITY_TOL: f64 = 1e-10;

/// Populations at or below this are treated as an empty projection.
pub const SINGULAR_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinSystem {
    n_nuclei: usize,
    dim: usize,
}

impl SpinSystem {
    pub fn new(n_nuclei: usize) -> Result<Self> {
        if n_nuclei > MAX_NUCLEI {
            return Err(Error::Capacity { n_nuclei, max: MAX_NUCLEI });
        }
        Ok(Self { n_nuclei, dim: 4 << n_nuclei })
    }

    /// Recovers the layout from a Hilbert-space dimension.
    pub fn from_dim(dim: usize) -> Result<Self> {
        if dim < 4 || !dim.is_power_of_two() {
            return Err(Error::Domain(format!("{dim} is not 4·2^n")));
        }
        Self::new(dim.trailing_zeros() as usize - 2)
    }

    pub fn n_nuclei(&self) -> usize {
        self.n_nuclei
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_sites(&self) -> usize {
        2 + self.n_nuclei
    }

    fn nuclear_dim(&self) -> usize {
        1 << self.n_nuclei
    }

    /// Spin-½ operator for `site` along `axis`, identity on every other factor.
    pub fn spin_operator(&self, site: usize, axis: Axis) -> Result<OperatorMatrix> {
        let sites = self.n_sites();
        if site >= sites {
            return Err(Error::Index { site, sites });
        }
        let left = DMatrix::<C64>::identity(1 << site, 1 << site);
        let right_dim = 1 << (sites - site - 1);
        let right = DMatrix::<C64>::identity(right_dim, right_dim);
        Ok(OperatorMatrix(left.kronecker(&axis.half_pauli()).kronecker(&right)))
    }

    /// QS = ¼·I − S1·S2 on the electron pair, tensored with the nuclear identity.
    pub fn singlet_projector(&self) -> OperatorMatrix {
        let pair = SpinSystem { n_nuclei: 0, dim: 4 };
        let mut s1s2 = CMatrix::zeros(4, 4);
        for axis in Axis::ALL {
            let a = pair.spin_operator(0, axis).expect("site 0 exists");
            let b = pair.spin_operator(1, axis).expect("site 1 exists");
            s1s2 += a.0 * b.0;
        }
        let electron = CMatrix::identity(4, 4).scale(0.25) - s1s2;
        let nd = self.nuclear_dim();
        OperatorMatrix(electron.kronecker(&CMatrix::identity(nd, nd)))
    }

    /// QT = I − QS.
    pub fn triplet_projector(&self) -> OperatorMatrix {
        OperatorMatrix(CMatrix::identity(self.dim, self.dim) - self.singlet_projector().0)
    }

    pub fn projectors(&self) -> Projectors {
        let singlet = self.singlet_projector();
        let triplet = OperatorMatrix(CMatrix::identity(self.dim, self.dim) - &singlet.0);
        Projectors { system: *self, singlet, triplet }
    }

    /// Electron state `preset` tensored with the maximally mixed nuclear state.
    pub fn density_from_preset(&self, preset: Preset) -> DensityMatrix {
        let nd = self.nuclear_dim();
        let nuclear = CMatrix::identity(nd, nd).unscale(nd as f64);
        DensityMatrix(preset.electron_density().kronecker(&nuclear))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn half_pauli(self) -> CMatrix {
        let z = C64::new(0.0, 0.0);
        let h = 0.5;
        let entries = match self {
            Axis::X => [z, C64::new(h, 0.0), C64::new(h, 0.0), z],
            Axis::Y => [z, C64::new(0.0, -h), C64::new(0.0, h), z],
            Axis::Z => [C64::new(h, 0.0), z, z, C64::new(-h, 0.0)],
        };
        CMatrix::from_row_slice(2, 2, &entries)
    }
}

/// Named initial electron states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Singlet,
    T0,
    TPlus,
    TMinus,
    UpDown,
    DownUp,
    Mixed,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Singlet,
        Preset::T0,
        Preset::TPlus,
        Preset::TMinus,
        Preset::UpDown,
        Preset::DownUp,
        Preset::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Singlet => "S",
            Preset::T0 => "T0",
            Preset::TPlus => "Tplus",
            Preset::TMinus => "Tminus",
            Preset::UpDown => "ud",
            Preset::DownUp => "du",
            Preset::Mixed => "mixed",
        }
    }

    fn electron_density(self) -> CMatrix {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let ket: [f64; 4] = match self {
            Preset::Singlet => [0.0, r, -r, 0.0],
            Preset::T0 => [0.0, r, r, 0.0],
            Preset::TPlus => [1.0, 0.0, 0.0, 0.0],
            Preset::TMinus => [0.0, 0.0, 0.0, 1.0],
            Preset::UpDown => [0.0, 1.0, 0.0, 0.0],
            Preset::DownUp => [0.0, 0.0, 1.0, 0.0],
            Preset::Mixed => return CMatrix::identity(4, 4).scale(0.25),
        };
        CMatrix::from_fn(4, 4, |i, j| C64::new(ket[i] * ket[j], 0.0))
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset {s:?} (expected one of S, T0, Tplus, Tminus, ud, du, mixed)"
                ))
            })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A square complex operator on the spin Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(pub CMatrix);

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.0)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.0)
    }
}

impl<'a> Add<&'a OperatorMatrix> for &'a OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &'a OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a OperatorMatrix> for &'a OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &'a OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 - &rhs.0)
    }
}

impl<'a> Mul<&'a OperatorMatrix> for &'a OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &'a OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 * &rhs.0)
    }
}

/// Singlet and triplet projectors of one spin system, built once and shared.
#[derive(Debug, Clone, PartialEq)]
pub struct Projectors {
    system: SpinSystem,
    singlet: OperatorMatrix,
    triplet: OperatorMatrix,
}

impl Projectors {
    pub fn system(&self) -> SpinSystem {
        self.system
    }

    pub fn dim(&self) -> usize {
        self.system.dim
    }

    pub fn singlet(&self) -> &OperatorMatrix {
        &self.singlet
    }

    pub fn triplet(&self) -> &OperatorMatrix {
        &self.triplet
    }

    /// Tr{QS ρ}, real part.
    pub fn singlet_weight(&self, rho: &CMatrix) -> f64 {
        trace_product(&self.singlet.0, rho)
    }

    /// Tr{QT ρ QT} = Tr{QT ρ}, real part.
    pub fn triplet_weight(&self, rho: &CMatrix) -> f64 {
        trace_product(&self.triplet.0, rho)
    }

    /// QT ρ QT.
    pub fn sandwich_triplet(&self, rho: &CMatrix) -> CMatrix {
        &self.triplet.0 * rho * &self.triplet.0
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: dim });
        }
        Ok(())
    }
}

/// Re Tr{A B} without forming the product.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub(crate) fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// A spin density matrix: Hermitian, PSD, 0 < trace ≤ 1.
///
/// Sub-normalized states are legal; the missing weight is recombined population.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates at [`DENSITY_TOL`].
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
        }
        let report = validate_matrix(&m, DENSITY_TOL);
        if !report.ok {
            return Err(Error::InvalidDensity(format!(
                "hermiticity defect {:e}, min eigenvalue {:e}, trace {}",
                report.hermiticity_defect, report.min_eigenvalue, report.trace
            )));
        }
        Ok(Self(m))
    }

    /// Pure state |ψ⟩⟨ψ| from a normalized ket.
    pub fn pure(ket: &[C64]) -> Result<Self> {
        let n = ket.len();
        let m = CMatrix::from_fn(n, n, |i, j| ket[i] * ket[j].conj());
        Self::new(m)
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.scale(factor))
    }

    pub fn as_operator(&self) -> OperatorMatrix {
        OperatorMatrix(self.0.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub ok: bool,
}

pub fn validate_density(rho: &DensityMatrix, tol: f64) -> ValidationReport {
    validate_matrix(&rho.0, tol)
}

pub fn validate_matrix(m: &CMatrix, tol: f64) -> ValidationReport {
    let hermiticity_defect = hermiticity_defect(m);
    let min_eigenvalue = hermitian_eigenvalues(m).first().copied().unwrap_or(f64::NAN);
    let trace = m.trace().re;
    let ok = hermiticity_defect <= tol
        && min_eigenvalue >= -tol
        && trace > 0.0
        && trace <= 1.0 + tol;
    ValidationReport { hermiticity_defect, min_eigenvalue, trace, ok }
}

/// QρQ / Tr{QρQ}: the state after a projection with outcome `q`.
pub fn conditional_projected_state(rho: &DensityMatrix, q: &OperatorMatrix) -> Result<DensityMatrix> {
    if q.dim() != rho.dim() {
        return Err(Error::Dimension { expected: q.dim(), got: rho.dim() });
    }
    let projected = &q.0 * &rho.0 * &q.0;
    let weight = projected.trace().re;
    if weight <= SINGULAR_CUTOFF {
        return Err(Error::SingularProjection { weight });
    }
    Ok(DensityMatrix(hermitize(&projected.unscale(weight))))
}
