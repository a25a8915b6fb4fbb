//! Position, skew and turn-around estimators for two-way timing batches.
//!
//! Five estimators share this module, all consuming a [`MeasurementBatch`]
//! plus the anchor layout:
//!
//! - [`mle`] — full maximum-likelihood over position, skew and per-anchor
//!   turn-around times, solved by damped Gauss-Newton.
//! - [`amle`] — approximate likelihood over position and skew only, with the
//!   reported turn-arounds substituted into the model and the induced
//!   variance inflation carried in a log term.
//! - [`lls`] — two-pass linear least squares on a lifted parameter vector,
//!   followed by a generalized least-squares correction that reconciles the
//!   lifted coordinates.
//! - [`sqls`] — two-pass quadratically constrained least squares on the same
//!   lifted vector, each pass solved exactly by [`crate::gtrs`].
//! - [`cccp_socp`] — robust l1 estimator that majorizes the non-convex
//!   residual and solves a second-order cone program per outer iteration.
//!
//! All estimators return an [`EstimateReport`]; richer per-method detail is
//! available from the `*_detailed` variants.

mod amle;
mod cccp;
mod lls;
mod lm;
mod mle;
mod simplex;
mod sqls;

pub use amle::{amle, amle_gradient, amle_objective, amle_with, AmleOutcome};
pub use cccp::{cccp_socp, cccp_socp_detailed, CccpConfig, CccpOutcome};
pub use lls::{lls, lls_detailed, LlsOutcome};
pub use mle::{mle, mle_gradient, mle_objective, mle_with, MleOutcome, MleState};
pub use sqls::{sqls, sqls_detailed, SqlsOutcome};

use crate::gtrs::GtrsError;
use crate::model::{MeasurementBatch, Position};
use crate::socp::SocpError;
use std::error::Error;
use std::fmt;

// ---------- options ----------

/// Knobs for the Gauss-Newton estimators ([`mle`], [`amle`]).
#[derive(Debug, Clone)]
pub struct GnOptions {
    /// Iteration budget; hitting it yields `SolverStatus::MaxIter`, not an error.
    pub max_iter: usize,
    /// Stop when the curvature-scaled gradient norm falls below
    /// `grad_tol * (1 + |objective|)`.
    pub grad_tol: f64,
    /// Lower clamp applied to each per-anchor response-noise sigma (seconds)
    /// so noiseless batches keep a finite likelihood.
    pub sigma_floor_s: f64,
    /// Lower clamp applied to each per-anchor report-noise gamma (seconds).
    pub gamma_floor_s: f64,
    /// Replace Gauss-Newton with a derivative-free Nelder-Mead search.
    pub use_simplex: bool,
}

impl Default for GnOptions {
    fn default() -> Self {
        GnOptions {
            max_iter: 500,
            grad_tol: 1e-10,
            sigma_floor_s: 1e-15,
            gamma_floor_s: 1e-15,
            use_simplex: false,
        }
    }
}

// ---------- errors ----------

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorError {
    /// Input dimensions do not line up (batch columns vs anchors vs noise vectors).
    Shape { what: &'static str },
    /// A non-finite value appeared where the math requires a finite one.
    NonFinite(&'static str),
    /// An option or configuration value is out of range.
    BadConfig(&'static str),
    /// Failure raised by the constrained least-squares machinery.
    Gtrs(GtrsError),
    /// Failure raised by the cone-program solver.
    Socp(SocpError),
}

impl fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorError::Shape { what } => write!(f, "shape mismatch: {what}"),
            EstimatorError::NonFinite(what) => write!(f, "non-finite value in {what}"),
            EstimatorError::BadConfig(what) => write!(f, "bad configuration: {what}"),
            EstimatorError::Gtrs(e) => write!(f, "constrained least squares failed: {e}"),
            EstimatorError::Socp(e) => write!(f, "cone solver failed: {e}"),
        }
    }
}

impl Error for EstimatorError {}

impl From<GtrsError> for EstimatorError {
    fn from(e: GtrsError) -> Self {
        EstimatorError::Gtrs(e)
    }
}

impl From<SocpError> for EstimatorError {
    fn from(e: SocpError) -> Self {
        EstimatorError::Socp(e)
    }
}

// ---------- shared input checks ----------

pub(crate) fn check_inputs(
    batch: &MeasurementBatch,
    anchors: &[Position],
    sigma_s: &[f64],
    gamma_s: &[f64],
    c_mps: f64,
) -> Result<(), EstimatorError> {
    if anchors.is_empty() {
        return Err(EstimatorError::Shape { what: "no anchors" });
    }
    if batch.z.ncols() != anchors.len() {
        return Err(EstimatorError::Shape { what: "batch columns vs anchors" });
    }
    if sigma_s.len() != anchors.len() {
        return Err(EstimatorError::Shape { what: "sigma vector vs anchors" });
    }
    if gamma_s.len() != anchors.len() {
        return Err(EstimatorError::Shape { what: "gamma vector vs anchors" });
    }
    if !(c_mps.is_finite() && c_mps > 0.0) {
        return Err(EstimatorError::BadConfig("propagation speed must be positive"));
    }
    if batch.z.iter().chain(batch.t_hat.iter()).any(|v| !v.is_finite()) {
        return Err(EstimatorError::NonFinite("measurement batch"));
    }
    if anchors.iter().any(|a| !a.is_finite()) {
        return Err(EstimatorError::NonFinite("anchor positions"));
    }
    if sigma_s.iter().chain(gamma_s.iter()).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(EstimatorError::BadConfig("noise levels must be finite and non-negative"));
    }
    Ok(())
}

// ---------- tests ----------
