//! Numerical machinery for evaluating Marton's inner bound on two-receiver
//! discrete memoryless broadcast channels.
//!
//! The crate is organised around the weighted one-letter functional
//! `T_alpha(X) = max_{p(u,v|x)} alpha*I(U;Y) + I(V;Z) - I(U;V)`:
//!
//! - [`probcore`] — distributions, channels, products and the
//!   entropy/mutual-information toolkit (all logs base 2).
//! - [`tmax`] — evaluation of `T(X)` / `T_alpha(X)` at a fixed input law by
//!   enumerating reduced deterministic maps and running multi-start projected
//!   gradient ascent, plus a brute-force grid oracle.
//! - [`envelope`] — upper concave envelopes over the simplex and the
//!   sum-rate / weighted-rate formulas built from them.
//! - [`extremal`] — perturbation machinery for certifying or refuting local
//!   maximisers: stationarity residuals, row/column merge reduction,
//!   pattern exclusion and the projected Hessian quadratic form.
//! - [`bssc`] — closed-form analysis of the binary skew-symmetric channel
//!   AND case under weight `alpha`.
//! - [`maxcorr`] — maximal-correlation coefficients and the XOR-case bounds.
//! - [`factorize`] — checkers and randomized falsification search for the
//!   factorization conjectures.
//!
//! All computations are pure functions of their inputs; values are immutable
//! after construction and safe to share across threads.

#![forbid(unsafe_code)]

use thiserror::Error;

pub mod bssc;
pub mod envelope;
pub mod extremal;
pub mod factorize;
pub mod maxcorr;
mod numeric;
pub mod probcore;
pub mod tmax;

/// Errors for construction and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not a probability vector: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("axis groups overlap or exceed table rank")]
    BadAxes,

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("infeasible map: symbol {symbol} has empty fiber but positive mass")]
    InfeasibleMap { symbol: usize },

    #[error("coupling marginal does not match target p(x): max deviation {max_dev:.3e}")]
    MarginalMismatch { max_dev: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown builtin channel: {0}")]
    UnknownBuiltin(String),

    #[error("numerical inconsistency: {0}")]
    Inconsistent(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
