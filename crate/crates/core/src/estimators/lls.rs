//! Two-pass linear least squares on the lifted parameter vector, followed by
//! a generalized least-squares correction.
//!
//! The lifted unknown is `y = (||x||^2, x1, x2, alpha^2, alpha)`. Pass one
//! solves the unweighted normal equations; the resulting position and
//! inverse-skew estimates feed the model-based row weights for pass two.
//! Because the lift treats `||x||^2`, `x`, `alpha^2` and `alpha` as free
//! coordinates, a final correction step reconciles them: with
//! `theta = (x1^2, x2^2, alpha^2)` the consistent combinations
//!
//! ```text
//! h = ( y1 + y4, y2^2, y3^2, y5^2 ),      E[h] = B theta,
//! B = [1 1 1; 1 0 0; 0 1 0; 0 0 1]
//! ```
//!
//! are fused by GLS under the first-order covariance `C_h = P C_y P'`, where
//! `P` is the Jacobian of `h` in `y` and `C_y` the pass-two normal-equation
//! covariance. Signs are restored from the linear coordinates of `y`.
//!
//! A strongly negative `theta` component (more than ten standard deviations
//! below zero) or a non-positive inverse skew marks the estimate degenerate;
//! magnitudes are still extracted from `|theta|` so callers always get a
//! best-effort position.

use nalgebra::{DMatrix, DVector};

use super::{check_inputs, EstimatorError};
use crate::gtrs::{build_gtrs, model_weights, GtrsProblem, LIFTED_DIM};
use crate::model::{residual_l1, EstimateReport, MeasurementBatch, Position, SolverStatus};

/// Report plus the lifted solution and the corrected squared parameters.
#[derive(Debug, Clone)]
pub struct LlsOutcome {
    pub report: EstimateReport,
    /// GLS-corrected `(x1^2, x2^2, alpha^2)`.
    pub theta: [f64; 3],
    /// Standard deviations of `theta` from the GLS normal matrix.
    pub theta_sd: [f64; 3],
    /// Pass-two lifted solution.
    pub y: DVector<f64>,
}

// ---------- weighted normal equations ----------

/// Solve `min || sqrt(W) (A y - b) ||` and return `(y, (A'WA)^{-1})`.
///
/// Works on the column-equilibrated system; if even that is ill-conditioned
/// a small Tikhonov ridge proportional to the average diagonal is added.
fn solve_weighted(p: &GtrsProblem) -> Result<(DVector<f64>, DMatrix<f64>), EstimatorError> {
    let rows = p.a.nrows();
    let mut aw = p.a.clone();
    let mut bw = p.b.clone();
    for r in 0..rows {
        let s = p.w[r].sqrt();
        for j in 0..LIFTED_DIM {
            aw[(r, j)] *= s;
        }
        bw[r] *= s;
    }

    let mut scale = DVector::from_element(LIFTED_DIM, 1.0);
    for j in 0..LIFTED_DIM {
        let norm = aw.column(j).norm();
        if norm > 0.0 {
            scale[j] = 1.0 / norm;
        }
        for r in 0..rows {
            aw[(r, j)] *= scale[j];
        }
    }

    let mut m = aw.transpose() * &aw;
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let (lmax, lmin) = (eig.max(), eig.min());
    if !(lmax.is_finite() && lmax > 0.0) {
        return Err(EstimatorError::NonFinite("normal matrix"));
    }
    if lmin <= lmax * 1e-12 {
        let ridge = 1e-10 * m.trace() / LIFTED_DIM as f64;
        for j in 0..LIFTED_DIM {
            m[(j, j)] += ridge;
        }
    }
    let chol = m
        .cholesky()
        .ok_or(EstimatorError::NonFinite("normal matrix factorization"))?;
    let y_scaled = chol.solve(&(aw.transpose() * &bw));
    let minv_scaled = chol.inverse();

    let y = DVector::from_fn(LIFTED_DIM, |j, _| y_scaled[j] * scale[j]);
    let minv = DMatrix::from_fn(LIFTED_DIM, LIFTED_DIM, |i, j| {
        minv_scaled[(i, j)] * scale[i] * scale[j]
    });
    Ok((y, minv))
}

/// Weighted residual sum of squares of `y` on problem `p`.
fn weighted_rss(p: &GtrsProblem, y: &DVector<f64>) -> f64 {
    let r = &p.a * y - &p.b;
    (0..r.len()).map(|m| p.w[m] * r[m] * r[m]).sum()
}

fn sign_of(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

// ---------- public api ----------

/// Two-pass linear estimate of position and skew.
pub fn lls(
    batch: &MeasurementBatch,
    anchors: &[Position],
    c_mps: f64,
    sigma_s: &[f64],
    gamma_s: &[f64],
) -> Result<EstimateReport, EstimatorError> {
    lls_detailed(batch, anchors, c_mps, sigma_s, gamma_s).map(|o| o.report)
}

/// Two-pass linear estimate with the corrected squares and their spreads.
pub fn lls_detailed(
    batch: &MeasurementBatch,
    anchors: &[Position],
    c_mps: f64,
    sigma_s: &[f64],
    gamma_s: &[f64],
) -> Result<LlsOutcome, EstimatorError> {
    check_inputs(batch, anchors, sigma_s, gamma_s, c_mps)?;

    // Pass one: identity weights.
    let p1 = build_gtrs(batch, anchors, c_mps, None)?;
    let (y1, _) = solve_weighted(&p1)?;

    // Model weights at the pass-one estimate. The inverse skew only enters
    // the variance model, so it is clamped to a physically plausible band.
    let guess = Position::new(y1[1], y1[2]);
    let alpha_guess = if y1[4].is_finite() { y1[4].abs().clamp(0.1, 10.0) } else { 1.0 };
    let weights = model_weights(guess, alpha_guess, anchors, sigma_s, gamma_s, batch.rounds());

    // Pass two: model weights.
    let p2 = build_gtrs(batch, anchors, c_mps, Some(&weights))?;
    let (y, minv) = solve_weighted(&p2)?;

    // Residual variance and the covariance of the lifted estimate.
    let rows = p2.a.nrows();
    let dof = rows.saturating_sub(LIFTED_DIM).max(1) as f64;
    let s2 = weighted_rss(&p2, &y) / dof;
    let c_y = minv * s2;

    // Consistent combinations and their first-order covariance.
    let h = DVector::from_row_slice(&[
        y[0] + y[3],
        y[1] * y[1],
        y[2] * y[2],
        y[4] * y[4],
    ]);
    let mut p_jac = DMatrix::zeros(4, LIFTED_DIM);
    p_jac[(0, 0)] = 1.0;
    p_jac[(0, 3)] = 1.0;
    p_jac[(1, 1)] = 2.0 * y[1];
    p_jac[(2, 2)] = 2.0 * y[2];
    p_jac[(3, 4)] = 2.0 * y[4];
    let mut c_h = &p_jac * &c_y * p_jac.transpose();
    let ridge = 1e-14 * c_h.trace() / 4.0 + 1e-300;
    for j in 0..4 {
        c_h[(j, j)] += ridge;
    }

    let b_map = DMatrix::from_row_slice(4, 3, &[
        1.0, 1.0, 1.0, //
        1.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, //
        0.0, 0.0, 1.0,
    ]);

    // GLS in row-equilibrated coordinates (the estimate is exactly invariant
    // to this scaling; the factorization is not).
    let d_scale = DVector::from_fn(4, |j, _| 1.0 / c_h[(j, j)].sqrt());
    let mut c_t = c_h.clone();
    let mut h_t = h.clone();
    let mut b_t = b_map.clone();
    for i in 0..4 {
        h_t[i] *= d_scale[i];
        for j in 0..4 {
            c_t[(i, j)] *= d_scale[i] * d_scale[j];
        }
        for j in 0..3 {
            b_t[(i, j)] *= d_scale[i];
        }
    }
    let mut c_chol = c_t.clone().cholesky();
    if c_chol.is_none() {
        for j in 0..4 {
            c_t[(j, j)] += 1e-10;
        }
        c_chol = c_t.cholesky();
    }
    let c_chol = c_chol.ok_or(EstimatorError::NonFinite("combination covariance"))?;
    let ct_inv_b = c_chol.solve(&b_t);
    let normal = b_t.transpose() * &ct_inv_b;
    let rhs = b_t.transpose() * c_chol.solve(&h_t);
    let n_chol = normal
        .cholesky()
        .ok_or(EstimatorError::NonFinite("correction normal matrix"))?;
    let theta_v = n_chol.solve(&rhs);
    let c_theta = n_chol.inverse();

    let theta = [theta_v[0], theta_v[1], theta_v[2]];
    let theta_sd = [
        c_theta[(0, 0)].max(0.0).sqrt(),
        c_theta[(1, 1)].max(0.0).sqrt(),
        c_theta[(2, 2)].max(0.0).sqrt(),
    ];
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(EstimatorError::NonFinite("corrected squares"));
    }

    // Signs come from the linear coordinates of the lifted vector. The sign
    // of the inverse skew is taken at face value even when it comes out
    // negative — the report carries it honestly; only a corrected square
    // that is negative beyond its own spread marks the fit degenerate.
    let position = Position::new(
        sign_of(y[1]) * theta[0].abs().sqrt(),
        sign_of(y[2]) * theta[1].abs().sqrt(),
    );
    let alpha = sign_of(y[4]) * theta[2].abs().sqrt().max(1e-12);

    let strongly_negative = (0..3)
        .any(|j| theta[j] < -(10.0 * theta_sd[j] + 1e-12 * (1.0 + theta[j].abs())));
    let status = if strongly_negative {
        SolverStatus::Degenerate
    } else {
        SolverStatus::Converged
    };

    let report = EstimateReport {
        position,
        skew: 1.0 / alpha,
        turnaround_s: None,
        iterations: 2,
        residual_l1_s: residual_l1(position, alpha, batch, anchors, c_mps),
        solver_status: status,
    };
    Ok(LlsOutcome { report, theta, theta_sd, y })
}

// ---------- tests ----------
