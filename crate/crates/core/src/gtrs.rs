//! Exact solver for the squared-range weighted least-squares subproblem.
//!
//! Squaring the calibrated range equation `z*alpha - t_hat/2 = d/c` and
//! collecting unknowns turns one TW-TOA batch into a linear system in the
//! lifted vector
//!
//! ```text
//! y = [ ||x||^2, x1, x2, alpha^2, alpha ]
//! ```
//!
//! whose components are tied together by a single quadratic constraint
//! `y2^2 + y3^2 + y5^2 = y1 + y4`, i.e. `y'Dy + 2f'y = 0` with
//! `D = diag(0,1,1,0,1)` and `f = [-1/2, 0, 0, -1/2, 0]`. Minimizing the
//! weighted residual of the linear system under that constraint is a
//! generalized trust-region subproblem: the KKT conditions reduce to a
//! one-dimensional secular equation
//!
//! ```text
//! phi(mu) = y(mu)' D y(mu) + 2 f' y(mu),
//! y(mu)   = (A'WA + mu D)^-1 (A'Wb - mu f),
//! ```
//!
//! which is strictly decreasing on the interval `I = (-1/mu1, inf)` where
//! `mu1` is the largest eigenvalue of `(A'WA)^-1/2 D (A'WA)^-1/2`. The root
//! is bracketed (expanding the interval tenfold to the right while no sign
//! change is seen) and then bisected.
//!
//! Numerics: the raw design matrix mixes units (`1/c^2` against seconds and
//! squared seconds), which is enough to push its condition number past 1e12
//! in double precision. The solver therefore equilibrates columns of `A`
//! internally. The multiplier is invariant under column scaling (the
//! constraint matrices transform contragrediently), so reported `mu` and
//! `phi` refer to the problem exactly as built.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::model::{EstimateReport, MeasurementBatch, Position, SolverStatus};

/// Length of the lifted unknown vector.
pub const LIFTED_DIM: usize = 5;

/// Hard cap on bisection steps.
pub const MAX_BISECTION_STEPS: usize = 200;

/// Diagonal of the constraint matrix `D`.
pub const CONSTRAINT_D_DIAG: [f64; LIFTED_DIM] = [0.0, 1.0, 1.0, 0.0, 1.0];

/// The constraint offset vector `f`.
pub const CONSTRAINT_F: [f64; LIFTED_DIM] = [-0.5, 0.0, 0.0, -0.5, 0.0];

/// `D` as a dense matrix (for callers assembling their own algebra).
pub fn constraint_d() -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_row_slice(&CONSTRAINT_D_DIAG))
}

/// `f` as a vector.
pub fn constraint_f() -> DVector<f64> {
    DVector::from_row_slice(&CONSTRAINT_F)
}

// ---------- problem and solution types ----------

/// The assembled linear model: one row per (round, reference) pair, ordered
/// round-major, with diagonal positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GtrsProblem {
    /// (K*N) x 5 design matrix; row layout `[1/c^2, -2a'/c^2, -z^2, z*t_hat]`.
    pub a: DMatrix<f64>,
    /// Right-hand side `-||a||^2/c^2 + t_hat^2/4`.
    pub b: DVector<f64>,
    /// Diagonal of `W`, strictly positive.
    pub w: DVector<f64>,
}

/// Root of the secular equation plus the recovered lifted vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GtrsSolution {
    pub y: DVector<f64>,
    /// Multiplier at the located root.
    pub mu: f64,
    /// Constraint residual `y'Dy + 2f'y` at the returned `y`.
    pub phi_at_mu: f64,
    pub bisection_steps: usize,
    /// True if any linear solve had to fall back to an eigenvalue-based
    /// pseudo-inverse (near-singular shifted normal matrix).
    pub used_pseudo_inverse: bool,
}

impl GtrsSolution {
    /// Lifting self-consistency: `| y1 - (y2^2 + y3^2) |` (squared meters).
    pub fn norm_consistency(&self) -> f64 {
        (self.y[0] - (self.y[1] * self.y[1] + self.y[2] * self.y[2])).abs()
    }

    /// Lifting self-consistency: `| y4 - y5^2 |` (dimensionless).
    pub fn alpha_consistency(&self) -> f64 {
        (self.y[3] - self.y[4] * self.y[4]).abs()
    }

    /// Cross-check skew from the `alpha^2` component, when positive.
    pub fn skew_from_alpha_squared(&self) -> Option<f64> {
        (self.y[3] > 0.0).then(|| 1.0 / self.y[3].sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GtrsError {
    /// Fewer than 5 rows: the lifted unknown is not identifiable.
    TooFewRows { rows: usize },
    /// Columns of the (weighted) design matrix are numerically dependent.
    RankDeficient { condition: f64 },
    /// A shifted linear solve failed beyond what the pseudo-inverse
    /// fallback could absorb.
    IllConditioned,
    /// The bracketing expansion exceeded its cap without a sign change.
    NoRoot,
    /// The skew component `y5` was not positive.
    Degenerate { y5: f64 },
    DimensionMismatch { rows: usize, weights: usize },
    BadWeights,
}

impl fmt::Display for GtrsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GtrsError::TooFewRows { rows } => {
                write!(f, "need at least {LIFTED_DIM} measurement rows, got {rows}")
            }
            GtrsError::RankDeficient { condition } => {
                write!(f, "design matrix numerically rank deficient (condition {condition:.3e})")
            }
            GtrsError::IllConditioned => write!(f, "shifted normal-matrix solve failed"),
            GtrsError::NoRoot => write!(f, "secular equation: no sign change within the expansion cap"),
            GtrsError::Degenerate { y5 } => {
                write!(f, "inverse-skew component must be positive, got {y5}")
            }
            GtrsError::DimensionMismatch { rows, weights } => {
                write!(f, "{rows} rows but {weights} weights")
            }
            GtrsError::BadWeights => write!(f, "weights must be finite and > 0"),
        }
    }
}

impl std::error::Error for GtrsError {}

// ---------- assembly ----------

/// Condition-number threshold above which the design matrix is treated as
/// rank deficient.
const RANK_CONDITION_LIMIT: f64 = 1e12;

/// Assemble the lifted linear model from a batch. Rows are ordered
/// round-major (`k` outer, `i` inner). With `weights` absent, `W` is the
/// identity — the first pass of the two-pass reweighting scheme.
pub fn build_gtrs(
    batch: &MeasurementBatch,
    anchors: &[Position],
    c_mps: f64,
    weights: Option<&DVector<f64>>,
) -> Result<GtrsProblem, GtrsError> {
    assert_eq!(batch.n_anchors(), anchors.len(), "batch columns must match the anchor list");
    let k = batch.rounds();
    let n = anchors.len();
    let rows = k * n;
    if rows < LIFTED_DIM {
        return Err(GtrsError::TooFewRows { rows });
    }
    let w = match weights {
        Some(w) => {
            if w.len() != rows {
                return Err(GtrsError::DimensionMismatch { rows, weights: w.len() });
            }
            if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(GtrsError::BadWeights);
            }
            w.clone()
        }
        None => DVector::from_element(rows, 1.0),
    };

    let c2 = c_mps * c_mps;
    let mut a = DMatrix::zeros(rows, LIFTED_DIM);
    let mut b = DVector::zeros(rows);
    for kk in 0..k {
        for i in 0..n {
            let r = kk * n + i;
            let z = batch.z[(kk, i)];
            let t = batch.t_hat[(kk, i)];
            let anc = anchors[i];
            a[(r, 0)] = 1.0 / c2;
            a[(r, 1)] = -2.0 * anc.x / c2;
            a[(r, 2)] = -2.0 * anc.y / c2;
            a[(r, 3)] = -z * z;
            a[(r, 4)] = z * t;
            b[r] = -(anc.x * anc.x + anc.y * anc.y) / c2 + t * t / 4.0;
        }
    }

    // Rank check on the weighted, column-equilibrated matrix: equilibration
    // removes the unit-induced spread so the condition number measures
    // genuine dependency (duplicate rows, collinear geometry), not scaling.
    let mut aw = a.clone();
    for r in 0..rows {
        let s = w[r].sqrt();
        for j in 0..LIFTED_DIM {
            aw[(r, j)] *= s;
        }
    }
    let mut max_norm: f64 = 0.0;
    let mut norms = [0.0f64; LIFTED_DIM];
    for j in 0..LIFTED_DIM {
        norms[j] = aw.column(j).norm();
        max_norm = max_norm.max(norms[j]);
    }
    if max_norm == 0.0 {
        return Err(GtrsError::RankDeficient { condition: f64::INFINITY });
    }
    for j in 0..LIFTED_DIM {
        if norms[j] <= max_norm * 1e-300 {
            return Err(GtrsError::RankDeficient { condition: f64::INFINITY });
        }
        let inv = 1.0 / norms[j];
        for r in 0..rows {
            aw[(r, j)] *= inv;
        }
    }
    let sv = aw.svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > RANK_CONDITION_LIMIT {
        return Err(GtrsError::RankDeficient { condition });
    }

    Ok(GtrsProblem { a, b, w })
}

/// Model-based row weights `1 / (d_i^2 (alpha^2 sigma_i^2 + gamma_i^2))`
/// evaluated at an estimated position and inverse skew, replicated across
/// rounds and normalized to a maximum of one (only relative weights matter).
///
/// Guards: distances are floored at 1 mm and per-row variances at 1e-30 s^2
/// so noise-free batches get the proper `1/d^2` limiting weights; after
/// normalization, weights are floored at 1e-14 to keep the weighted system
/// invertible when noise levels are wildly mixed.
pub fn model_weights(
    position: Position,
    alpha: f64,
    anchors: &[Position],
    sigma_s: &[f64],
    gamma_s: &[f64],
    rounds: usize,
) -> DVector<f64> {
    assert_eq!(anchors.len(), sigma_s.len());
    assert_eq!(anchors.len(), gamma_s.len());
    let n = anchors.len();
    let mut w = DVector::zeros(rounds * n);
    for k in 0..rounds {
        for i in 0..n {
            let d = position.distance_to(&anchors[i]).max(1e-3);
            let var = (alpha * alpha * sigma_s[i] * sigma_s[i] + gamma_s[i] * gamma_s[i]).max(1e-30);
            w[k * n + i] = 1.0 / (d * d * var);
        }
    }
    let max = w.max();
    if max > 0.0 && max.is_finite() {
        w /= max;
    }
    w.apply(|v| *v = v.max(1e-14));
    w
}

// ---------- secular equation ----------

/// Internal equilibrated form: `y = scale .* y_tilde`, `phi` and `mu`
/// invariant under the scaling.
struct Prepared {
    m: DMatrix<f64>,       // scaled normal matrix  S A'WA S
    rhs: DVector<f64>,     // scaled right-hand side S A'Wb
    d_diag: DVector<f64>,  // scaled constraint diagonal S D S
    f: DVector<f64>,       // scaled constraint offset S f
    scale: DVector<f64>,
    mu1: f64,
}

fn prepare(p: &GtrsProblem) -> Result<Prepared, GtrsError> {
    let rows = p.a.nrows();
    if rows < LIFTED_DIM {
        return Err(GtrsError::TooFewRows { rows });
    }
    if p.b.len() != rows || p.w.len() != rows {
        return Err(GtrsError::DimensionMismatch { rows, weights: p.w.len() });
    }
    if p.w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(GtrsError::BadWeights);
    }

    // Column equilibration of sqrt(W) A.
    let mut aw = p.a.clone();
    for r in 0..rows {
        let s = p.w[r].sqrt();
        for j in 0..LIFTED_DIM {
            aw[(r, j)] *= s;
        }
    }
    let mut scale = DVector::zeros(LIFTED_DIM);
    for j in 0..LIFTED_DIM {
        let norm = aw.column(j).norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(GtrsError::RankDeficient { condition: f64::INFINITY });
        }
        scale[j] = 1.0 / norm;
    }
    let mut a_eq = aw;
    for j in 0..LIFTED_DIM {
        let s = scale[j];
        for r in 0..rows {
            a_eq[(r, j)] *= s;
        }
    }

    let m = a_eq.transpose() * &a_eq;
    let mut bw = p.b.clone();
    for r in 0..rows {
        bw[r] *= p.w[r].sqrt();
    }
    let rhs = a_eq.transpose() * bw;

    let d_diag = DVector::from_fn(LIFTED_DIM, |j, _| {
        CONSTRAINT_D_DIAG[j] * scale[j] * scale[j]
    });
    let f = DVector::from_fn(LIFTED_DIM, |j, _| CONSTRAINT_F[j] * scale[j]);

    // mu1 = largest eigenvalue of M^-1/2 D M^-1/2 via symmetric
    // eigendecompositions of the equilibrated 5x5 matrices.
    let eig = SymmetricEigen::new(m.clone());
    let lam_min = eig.eigenvalues.min();
    let lam_max = eig.eigenvalues.max();
    if !(lam_min > 0.0) || lam_max / lam_min > 1e14 {
        return Err(GtrsError::RankDeficient { condition: lam_max / lam_min.max(f64::MIN_POSITIVE) });
    }
    let mut inv_sqrt = DMatrix::zeros(LIFTED_DIM, LIFTED_DIM);
    for j in 0..LIFTED_DIM {
        let col = eig.eigenvectors.column(j);
        let v = 1.0 / eig.eigenvalues[j].sqrt();
        inv_sqrt += v * &col * col.transpose();
    }
    let mut mid = inv_sqrt.clone();
    for j in 0..LIFTED_DIM {
        let dj = d_diag[j];
        for r in 0..LIFTED_DIM {
            mid[(r, j)] *= dj;
        }
    }
    let central = &mid * &inv_sqrt;
    let sym = 0.5 * (&central + central.transpose());
    let mu1 = SymmetricEigen::new(sym).eigenvalues.max();
    if !(mu1.is_finite() && mu1 > 0.0) {
        return Err(GtrsError::IllConditioned);
    }

    Ok(Prepared { m, rhs, d_diag, f, scale, mu1 })
}

impl Prepared {
    /// Solve `(M + mu D) y = rhs - mu f`; Cholesky first, eigenvalue-based
    /// pseudo-inverse if the shifted matrix is numerically indefinite.
    fn solve_shifted(&self, mu: f64) -> Result<(DVector<f64>, bool), GtrsError> {
        let mut shifted = self.m.clone();
        for j in 0..LIFTED_DIM {
            shifted[(j, j)] += mu * self.d_diag[j];
        }
        let rhs = &self.rhs - mu * &self.f;
        if let Some(chol) = shifted.clone().cholesky() {
            return Ok((chol.solve(&rhs), false));
        }
        let eig = SymmetricEigen::new(shifted);
        let lam_max = eig.eigenvalues.iter().cloned().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(lam_max.is_finite() && lam_max > 0.0) {
            return Err(GtrsError::IllConditioned);
        }
        let cut = lam_max * 1e-14;
        let mut y = DVector::zeros(LIFTED_DIM);
        for j in 0..LIFTED_DIM {
            let lam = eig.eigenvalues[j];
            if lam.abs() > cut {
                let col = eig.eigenvectors.column(j);
                y += (col.dot(&rhs) / lam) * col;
            }
        }
        Ok((y, true))
    }

    /// Secular-equation value at `mu`, plus the (unscaled) lifted vector.
    fn phi(&self, mu: f64) -> Result<(f64, DVector<f64>, bool), GtrsError> {
        let (yt, pseudo) = self.solve_shifted(mu)?;
        let phi = self.constraint_of(&yt);
        let y = DVector::from_fn(LIFTED_DIM, |j, _| yt[j] * self.scale[j]);
        Ok((phi, y, pseudo))
    }

    fn constraint_of(&self, yt: &DVector<f64>) -> f64 {
        let mut phi = 0.0;
        for j in 0..LIFTED_DIM {
            phi += self.d_diag[j] * yt[j] * yt[j] + 2.0 * self.f[j] * yt[j];
        }
        phi
    }

    /// One tangent-line correction at `mu`: one ulp of `mu` can move `phi`
    /// by more than the requested tolerance (the multiplier's magnitude is
    /// set by the unit spread between A'WA and D), so after bisection has
    /// pinned `mu` to floating-point resolution the remaining constraint
    /// violation is removed by stepping along the solution-curve tangent
    /// `y'(mu) = -(M + mu D)^-1 (D y + f)` to the nearest constraint zero.
    /// The step solves a scalar quadratic exactly; stationarity is disturbed
    /// only at second order in the (sub-ulp) step length.
    fn refine_on_tangent(&self, mu: f64) -> Result<(f64, DVector<f64>, bool), GtrsError> {
        let (yt, pseudo) = self.solve_shifted(mu)?;
        let mut grad = DVector::zeros(LIFTED_DIM);
        for j in 0..LIFTED_DIM {
            grad[j] = self.d_diag[j] * yt[j] + self.f[j];
        }
        let mut shifted = self.m.clone();
        for j in 0..LIFTED_DIM {
            shifted[(j, j)] += mu * self.d_diag[j];
        }
        let dir = match shifted.cholesky() {
            Some(chol) => -chol.solve(&grad),
            None => {
                let y = DVector::from_fn(LIFTED_DIM, |j, _| yt[j] * self.scale[j]);
                return Ok((self.constraint_of(&yt), y, pseudo));
            }
        };
        // phi(y + t dir) = a t^2 + b t + c0; take the root nearest zero.
        let c0 = self.constraint_of(&yt);
        let mut a = 0.0;
        let mut b = 0.0;
        for j in 0..LIFTED_DIM {
            a += self.d_diag[j] * dir[j] * dir[j];
            b += 2.0 * (self.d_diag[j] * yt[j] + self.f[j]) * dir[j];
        }
        let disc = b * b - 4.0 * a * c0;
        let adjusted = if disc >= 0.0 && b != 0.0 {
            let t = -2.0 * c0 / (b + b.signum() * disc.sqrt());
            let cand = &yt + t * &dir;
            let phi_cand = self.constraint_of(&cand);
            (phi_cand.abs() < c0.abs()).then_some((phi_cand, cand))
        } else {
            None
        };
        let (phi, yt) = adjusted.unwrap_or((c0, yt));
        let y = DVector::from_fn(LIFTED_DIM, |j, _| yt[j] * self.scale[j]);
        Ok((phi, y, pseudo))
    }
}

/// Evaluate the secular function `phi(mu)` for a problem — exposed so the
/// monotonicity of `phi` can be checked directly.
pub fn gtrs_phi(p: &GtrsProblem, mu: f64) -> Result<f64, GtrsError> {
    let prep = prepare(p)?;
    prep.phi(mu).map(|(phi, _, _)| phi)
}

/// Left endpoint `-1/mu1` of the interval on which `phi` is defined and
/// strictly decreasing.
pub fn multiplier_interval_start(p: &GtrsProblem) -> Result<f64, GtrsError> {
    prepare(p).map(|prep| -1.0 / prep.mu1)
}

/// Locate the root of the secular equation by bracketing and bisection.
///
/// `tol` is the absolute tolerance on `|phi|`; when `None` it defaults to
/// `1e-10 * (1 + ||b||^2)`. Bisection also stops when the bracket collapses
/// to floating-point resolution, whichever comes first (at most
/// [`MAX_BISECTION_STEPS`] steps).
pub fn solve_gtrs(p: &GtrsProblem, tol: Option<f64>) -> Result<GtrsSolution, GtrsError> {
    let prep = prepare(p)?;
    let tol = tol.unwrap_or_else(|| 1e-10 * (1.0 + p.b.norm_squared()));

    let inv_mu1 = 1.0 / prep.mu1;
    // The multiplier carries the units of A'WA relative to D, so the search
    // ranges below are expressed in units of the interval itself, which can
    // sit many orders of magnitude away from 1.
    let expansion_cap = 1e15 * inv_mu1;

    let mut used_pseudo = false;
    let eval = |mu: f64, pseudo_seen: &mut bool| -> Result<(f64, DVector<f64>), GtrsError> {
        let (phi, y, pseudo) = prep.phi(mu)?;
        *pseudo_seen |= pseudo;
        Ok((phi, y))
    };

    let finish = |best: (f64, f64, f64, DVector<f64>), steps: usize, mut pseudo: bool| {
        let (mut phi, mut y) = (best.2, best.3);
        if let Ok((phi_ref, y_ref, ps)) = prep.refine_on_tangent(best.1) {
            pseudo |= ps;
            if phi_ref.abs() < phi.abs() {
                phi = phi_ref;
                y = y_ref;
            }
        }
        GtrsSolution {
            y,
            mu: best.1,
            phi_at_mu: phi,
            bisection_steps: steps,
            used_pseudo_inverse: pseudo,
        }
    };

    // Probe the unconstrained minimizer first. Its sign says on which side
    // of zero the root lies, and exactly consistent data (noise-free
    // batches) puts the root at zero itself, where a sign change is too
    // small to bracket reliably.
    let (phi_zero, y_zero) = eval(0.0, &mut used_pseudo)?;
    // Track the best iterate seen in case the tolerance is never met.
    let mut best = (phi_zero.abs(), 0.0, phi_zero, y_zero);
    if best.0 <= tol {
        return Ok(finish(best, 0, used_pseudo));
    }

    let (mut lo, mut phi_lo, mut hi, mut phi_hi);
    if phi_zero > 0.0 {
        // Root to the right of zero: march right in decade steps until the
        // sign flips.
        lo = 0.0;
        phi_lo = phi_zero;
        hi = inv_mu1;
        let (phi, y) = eval(hi, &mut used_pseudo)?;
        phi_hi = phi;
        if phi_hi.abs() < best.0 {
            best = (phi_hi.abs(), hi, phi_hi, y);
            if best.0 <= tol {
                return Ok(finish(best, 0, used_pseudo));
            }
        }
        while phi_lo.signum() == phi_hi.signum() {
            if hi > expansion_cap {
                return Err(GtrsError::NoRoot);
            }
            lo = hi;
            phi_lo = phi_hi;
            hi *= 10.0;
            let (phi, y) = eval(hi, &mut used_pseudo)?;
            phi_hi = phi;
            if phi_hi.abs() < best.0 {
                best = (phi_hi.abs(), hi, phi_hi, y);
                if best.0 <= tol {
                    return Ok(finish(best, 0, used_pseudo));
                }
            }
        }
    } else {
        // Root between the interval's left endpoint and zero. March leftward
        // in decade steps starting just below zero: consistent (noise-free)
        // batches put the root within rounding of zero, so the bracket
        // closes after a few probes. Probes hard against the endpoint hit
        // the singularity of the shifted solve and their sign cannot be
        // trusted, so the march keeps the fixed inset and gives up there.
        hi = 0.0;
        phi_hi = phi_zero;
        let mut t = 1e-16;
        loop {
            lo = -t * inv_mu1;
            let (phi, y) = eval(lo, &mut used_pseudo)?;
            phi_lo = phi;
            if phi_lo.abs() < best.0 {
                best = (phi_lo.abs(), lo, phi_lo, y);
                if best.0 <= tol {
                    return Ok(finish(best, 0, used_pseudo));
                }
            }
            if phi_lo.signum() != phi_hi.signum() {
                break;
            }
            if t >= 1.0 - 1e-12 {
                return Err(GtrsError::NoRoot);
            }
            hi = lo;
            phi_hi = phi_lo;
            t = (t * 10.0).min(1.0 - 1e-12);
        }
    }

    let mut steps = 0;
    while steps < MAX_BISECTION_STEPS {
        let width = hi - lo;
        // Resolution floor: once the bracket is a couple of ulps wide at the
        // scale of the interval itself, further halving is meaningless; the
        // tangent correction in `finish` takes over from there.
        if width <= f64::EPSILON * lo.abs().max(hi.abs()).max(inv_mu1) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        steps += 1;
        let (phi_mid, y_mid) = eval(mid, &mut used_pseudo)?;
        if phi_mid.abs() < best.0 {
            best = (phi_mid.abs(), mid, phi_mid, y_mid);
        }
        if phi_mid.abs() <= tol {
            break;
        }
        if phi_mid.signum() == phi_lo.signum() {
            lo = mid;
            phi_lo = phi_mid;
        } else {
            hi = mid;
        }
    }

    Ok(finish(best, steps, used_pseudo))
}

/// Read position and skew off a lifted solution: `x = (y2, y3)`,
/// `w = 1/y5`. The redundant `y4 = alpha^2` component is kept only as a
/// cross-check ([`GtrsSolution::skew_from_alpha_squared`]).
///
/// The report's residual field is NaN here — this function sees no
/// measurements; callers that hold the batch fill it in.
pub fn extract_estimate(sol: &GtrsSolution) -> Result<EstimateReport, GtrsError> {
    let y5 = sol.y[4];
    if !(y5.is_finite() && y5 > 0.0) {
        return Err(GtrsError::Degenerate { y5 });
    }
    Ok(EstimateReport {
        position: Position::new(sol.y[1], sol.y[2]),
        skew: 1.0 / y5,
        turnaround_s: None,
        iterations: sol.bisection_steps,
        residual_l1_s: f64::NAN,
        solver_status: SolverStatus::Converged,
    })
}
