use thiserror::Error;

/// Everything that can go wrong inside the numerical layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{n_sites} sites exceed the configured cap of {cap}")]
    DimensionOverflow { n_sites: usize, cap: usize },

    #[error("site {index} is outside 1..={n_sites}")]
    InvalidSite { index: usize, n_sites: usize },

    #[error("invalid site set: {reason}")]
    InvalidSiteSet { reason: &'static str },

    #[error("matrix is not a density matrix: {reason} (deviation {deviation:e})")]
    InvalidDensityMatrix { reason: &'static str, deviation: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    #[error("integrator exhausted {max_steps} steps at t = {t}")]
    StepLimit { t: f64, max_steps: usize },

    #[error("step size underflow at t = {t} (h = {step:e})")]
    StepSizeUnderflow { t: f64, step: f64 },

    #[error("non-finite derivative at t = {t}, component {component}")]
    NonFinite { t: f64, component: usize },

    #[error("trace drifted to {trace} at t = {t}")]
    TraceDrift { t: f64, trace: f64 },

    #[error("positivity violated at t = {t}: smallest eigenvalue {min_eigenvalue:e}")]
    PositivityViolation { t: f64, min_eigenvalue: f64 },

    #[error("state left the Bloch ball at t = {t}: s0^2 + 4|s+|^2 = {radius_sq}")]
    Unphysical { t: f64, radius_sq: f64 },

    #[error("trace identity violated for {label} (residual {residual:e})")]
    IdentityViolation { label: &'static str, residual: f64 },

    #[error("marginal of the (K+1)-particle state disagrees with rho_K (residual {residual:e})")]
    InconsistentMarginals { residual: f64 },

    #[error("initial state is an equilibrium point of the conservative flow; use the constant solution")]
    EquilibriumPoint,

    #[error("no unique stationary state without relaxation (gamma = 0)")]
    NoStationaryState,

    #[error("pair state is not exchange symmetric (residual {residual:e})")]
    NotExchangeSymmetric { residual: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
