//! Two-pass quadratically constrained least squares on the lifted vector.
//!
//! Both passes minimize `|| sqrt(W) (A y - b) ||` subject to the exact lift
//! constraint `y'Dy + 2f'y = 0` (see [`crate::gtrs`]); the first pass runs
//! with identity weights, the second with model-based weights evaluated at
//! the pass-one estimate. Unlike the plain linear estimator, the constraint
//! ties `||x||^2` to `x` and `alpha^2` to `alpha`, so no correction step is
//! needed afterwards.

use nalgebra::DVector;

use super::{check_inputs, EstimatorError};
use crate::gtrs::{build_gtrs, extract_estimate, model_weights, solve_gtrs, GtrsSolution};
use crate::model::{residual_l1, EstimateReport, MeasurementBatch, Position, SolverStatus};

/// Report plus both constrained solutions and the pass-two weights.
#[derive(Debug, Clone)]
pub struct SqlsOutcome {
    pub report: EstimateReport,
    pub pass1: GtrsSolution,
    pub pass2: GtrsSolution,
    /// Row weights used by the second pass.
    pub weights: DVector<f64>,
}

/// Two-pass constrained least-squares estimate of position and skew.
pub fn sqls(
    batch: &MeasurementBatch,
    anchors: &[Position],
    c_mps: f64,
    sigma_s: &[f64],
    gamma_s: &[f64],
) -> Result<EstimateReport, EstimatorError> {
    sqls_detailed(batch, anchors, c_mps, sigma_s, gamma_s).map(|o| o.report)
}

/// Two-pass constrained least squares with per-pass detail.
pub fn sqls_detailed(
    batch: &MeasurementBatch,
    anchors: &[Position],
    c_mps: f64,
    sigma_s: &[f64],
    gamma_s: &[f64],
) -> Result<SqlsOutcome, EstimatorError> {
    check_inputs(batch, anchors, sigma_s, gamma_s, c_mps)?;

    // Pass one: identity weights.
    let p1 = build_gtrs(batch, anchors, c_mps, None)?;
    let sol1 = solve_gtrs(&p1, None)?;
    let rep1 = extract_estimate(&sol1)?;

    // Model weights at the pass-one estimate.
    let weights = model_weights(
        rep1.position,
        sol1.y[4],
        anchors,
        sigma_s,
        gamma_s,
        batch.rounds(),
    );

    // Pass two: model weights.
    let p2 = build_gtrs(batch, anchors, c_mps, Some(&weights))?;
    let sol2 = solve_gtrs(&p2, None)?;
    let rep2 = extract_estimate(&sol2)?;

    let alpha = sol2.y[4];
    let report = EstimateReport {
        position: rep2.position,
        skew: rep2.skew,
        turnaround_s: None,
        iterations: sol1.bisection_steps + sol2.bisection_steps,
        residual_l1_s: residual_l1(rep2.position, alpha, batch, anchors, c_mps),
        solver_status: SolverStatus::Converged,
    };
    Ok(SqlsOutcome { report, pass1: sol1, pass2: sol2, weights })
}

// ---------- tests ----------
