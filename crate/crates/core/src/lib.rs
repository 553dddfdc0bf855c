//! Edge-variable spectral toolkit.
//!
//! Generates truncated Laplace spectra of model geometries, pushes them
//! through monotone spectral encodings `C = a - phi(lambda)` (affine,
//! polynomial-type, perturbed), and provides the counting, estimation,
//! transform, and realization machinery needed to study the bulk regime
//! `C -> -infinity` in the edge variable `y = a - C`.

// validation uses `!(x > 0.0)` so that NaN inputs fail closed
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod counting;
pub mod encoding;
pub mod estimation;
pub mod io;
pub mod krein;
pub mod spectra;
pub mod transforms;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("lattice enumeration would exceed the configured cap of {cap} points")]
    LatticeCapExceeded { cap: usize },
    #[error("root finder failed for l = {l} on bracket [{lo}, {hi}]")]
    RootFinding { l: u32, lo: f64, hi: f64 },
    #[error("encoding is not strictly decreasing near lambda = {lambda}")]
    MonotonicityViolation { lambda: f64 },
    #[error("no sign change found below lambda = {cap}")]
    BracketFailure { cap: f64 },
    #[error("perturbation family has no theoretical envelope for this rule")]
    UnsupportedFamily,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
    #[error("residual is numerically zero; remainder probe is degenerate")]
    DegenerateResidual,
    #[error("recurrence breakdown at index {index} (duplicate or clustered support)")]
    Breakdown { index: usize },
    #[error("qd positivity failure at index {index} (support touches 0 or conditioning loss)")]
    QdPositivity { index: usize },
    #[error("heat-trace tail is not controlled at t = {t}")]
    UncontrolledTail { t: f64 },
    #[error("operation requires an affine encoding rule")]
    NonAffineRule,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// `n` log-spaced points on `[lo, hi]`, endpoints included.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2, "log_spaced needs 0 < lo < hi, n >= 2");
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
