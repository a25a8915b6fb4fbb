//! Single-target positioning from two-way time-of-arrival (TW-TOA) round
//! trips in a network whose nodes are not synchronized.
//!
//! A target node ranges against `N` reference nodes at known positions. Each
//! round trip is timed on the target's own clock, which runs at an unknown
//! rate `w` (the skew), so every observation is scaled by `w`; clock offsets
//! cancel in the round trip and are not modeled. Reference node `i` waits a
//! turn-around time `T_i` before replying and reports its own (noisy)
//! measurement of that wait. From `K` rounds per node the estimators in this
//! crate recover the target position and the skew jointly.
//!
//! Module map:
//!
//! - [`model`]: scenario description, measurement equations, reports.
//! - [`sim`]: deterministic batch simulator with optional NLOS contamination.
//! - [`gtrs`]: exact solver for the squared-range least-squares subproblem
//!   (a generalized trust-region subproblem solved by bisection).
//! - [`socp`]: small dense second-order cone solver (interior point).
//! - [`estimators`]: the five estimators — full ML, approximate ML, linear
//!   least squares with correction, squared-range LS, and a robust L1
//!   minimizer via convex-concave iterations over SOCP subproblems.
//! - [`crlb`]: Fisher information and position error bound.
//! - [`bench`]: Monte Carlo harness — RMSE tables, convergence traces,
//!   timing comparisons, all seeded and reproducible.
//! - [`config`]: JSON experiment configuration shared with the CLI.

pub mod bench;
pub mod config;
pub mod crlb;
pub mod estimators;
pub mod gtrs;
pub mod model;
pub mod sim;
pub mod socp;

pub use model::{
    predict_twtoa, residual_l1, ClockModel, EstimateReport, MeasurementBatch, NetworkScenario,
    Position, SolverStatus,
};
