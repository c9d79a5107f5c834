//! Numerical laboratory for the parabolic thin-obstacle (Signorini) problem
//!
//! The heat equation is solved in the half-box
//! `[-1,1]^{n-1} x [0,1] x (t0,t1]` subject to the unilateral conditions
//! `v >= phi`, `-d_{x_n} v >= 0`, `(v - phi) d_{x_n} v = 0` on the thin
//! plane `{x_n = 0}`. Each implicit-Euler step is a linear complementarity
//! problem solved by projected SOR (with active-set enumeration and
//! penalization as independent cross-checks).
//!
//! On top of the solver sit the diagnostics this crate exists for:
//!
//! * [`timereg`] — incremental time quotients, the subcaloricity residual of
//!   their positive/negative parts, sup bounds for the discrete time
//!   derivative, parabolic energy ratios, and Hoelder-decay fits,
//! * [`freeboundary`] — contact-set extraction and the graph
//!   `x_{n-1} = g(x'', t)` with parabolic Lipschitz estimates,
//! * [`blowup`] — Gaussian-weighted height function, parabolic rescalings,
//!   and regular-point classification against the 3/2-homogeneous profile.
//!
//! Everything is deterministic: no randomness, closed-form least squares,
//! fixed sweep orders.

pub mod blowup;
pub mod cli;
pub mod fitting;
pub mod freeboundary;
pub mod grid;
pub mod io;
pub mod problem;
pub mod solver;
pub mod timereg;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("compatibility violation at thin node {coords:?}: phi0 = {phi0} < phi(t0) = {phi}")]
    Compatibility { coords: Vec<f64>, phi0: f64, phi: f64 },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("preset parameter error: {0}")]
    PresetParams(String),

    #[error("problem has no analytic oracle")]
    NoOracle,

    #[error("solver did not converge at slice {slice} (residual {residual:.3e})")]
    NonConverged { slice: usize, residual: f64 },

    #[error("numerical abort: non-finite value at slice {slice}")]
    NumericalAbort { slice: usize },

    #[error("config error at `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("degenerate center: {0}")]
    DegenerateCenter(String),

    #[error("center is not a free boundary point")]
    NotFreeBoundary,

    #[error("window is non-graphical: {flagged} of {total} columns flagged")]
    NonGraphical { flagged: usize, total: usize },

    #[error("{0}")]
    Analysis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
