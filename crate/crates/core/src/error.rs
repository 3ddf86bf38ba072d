use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{n_nuclei} nuclei exceeds the capacity of {max} (dimension cap 4096)")]
    Capacity { n_nuclei: usize, max: usize },

    #[error("site index {site} out of range for {sites} spin sites")]
    Index { site: usize, sites: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("projected weight {weight:e} is at or below the singular cutoff")]
    SingularProjection { weight: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("k_s*dt = {product} exceeds the jump-step cap {cap}")]
    StepSize { product: f64, cap: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("numerical failure at t = {time}: {reason}")]
    NumericalFailure { time: f64, reason: String },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
}
