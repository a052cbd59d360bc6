//! Finite-dimensional bosonic mean-field simulator.
//!
//! Simulates the many-body Schrödinger dynamics of `N` bosons in `d` modes
//! under a mean-field Hamiltonian, integrates the companion Hartree equation
//! for the condensate vector, and measures the statistics of the number of
//! particles outside the condensate. The `bounds` module evaluates the
//! closed-form exponential-condensation bound and checks it against the
//! simulated moment generating function.

pub mod bounds;
pub mod dynamics;
pub mod excitation;
pub mod fock;
pub mod scenario;

use thiserror::Error;

pub type C64 = num_complex::Complex64;

/// Hard cap on basis sizes; larger requests fail instead of degrading.
pub const CAPACITY_CAP: usize = 200_000;

/// Largest dimension that is materialized densely for eigendecompositions.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: basis would have {requested} states (cap {cap})")]
    Capacity { requested: u128, cap: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("integration accuracy: norm drift {drift:.3e} exceeds {limit:.3e}; reduce the step size")]
    IntegrationAccuracy { drift: f64, limit: f64 },
    #[error("domain error: beta = {beta} is not below beta_c(t) = {beta_c}")]
    BetaDomain { beta: f64, beta_c: f64 },
    #[error("grid too coarse for the finite-difference budget: {0}")]
    GridResolution(String),
    #[error("quadrature: {0}")]
    Quadrature(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
