//! Full maximum-likelihood estimation of position, clock skew and the
//! per-anchor turn-around times.
//!
//! The parameter vector is `(x1, x2, w, T_1..T_N)`. Each round/anchor pair
//! contributes two residuals: the two-way observation against its model
//! `w (T_i/2 + d_i/c)` weighted by `sqrt(2)/sigma_i`, and the reported
//! turn-around against `T_i` weighted by `1/gamma_i`. The weighted squared
//! sum is minimized by damped Gauss-Newton with projections keeping the skew
//! positive and the turn-arounds non-negative.

use nalgebra::{DMatrix, DVector};

use super::lm::{self, LmModel};
use super::simplex;
use super::{check_inputs, EstimatorError, GnOptions};
use crate::model::{residual_l1, EstimateReport, MeasurementBatch, Position, SolverStatus};

// ---------- state ----------

/// Initial (or fitted) point for the full likelihood search.
#[derive(Debug, Clone, PartialEq)]
pub struct MleState {
    pub position: Position,
    pub skew: f64,
    /// One turn-around time per anchor, seconds.
    pub turnaround_s: Vec<f64>,
}

impl MleState {
    pub fn new(position: Position, skew: f64, turnaround_s: Vec<f64>) -> Self {
        MleState { position, skew, turnaround_s }
    }

    /// Start from column means of the reported turn-arounds and unit skew.
    pub fn from_reports(position: Position, batch: &MeasurementBatch) -> Self {
        let t = (0..batch.t_hat.ncols()).map(|i| batch.t_hat.column(i).mean()).collect();
        MleState { position, skew: 1.0, turnaround_s: t }
    }

    fn to_vector(&self) -> DVector<f64> {
        let n = self.turnaround_s.len();
        let mut p = DVector::zeros(3 + n);
        p[0] = self.position.x;
        p[1] = self.position.y;
        p[2] = self.skew;
        for (i, t) in self.turnaround_s.iter().enumerate() {
            p[3 + i] = *t;
        }
        p
    }

    fn from_vector(p: &DVector<f64>) -> Self {
        MleState {
            position: Position::new(p[0], p[1]),
            skew: p[2],
            turnaround_s: p.iter().skip(3).copied().collect(),
        }
    }
}

/// Report plus diagnostics for the full likelihood fit.
#[derive(Debug, Clone)]
pub struct MleOutcome {
    pub report: EstimateReport,
    /// Weighted squared-residual objective at the solution.
    pub objective: f64,
    /// Curvature-scaled gradient norm at exit.
    pub grad_norm: f64,
    pub state: MleState,
}

// ---------- model ----------

struct MleProblem<'a> {
    batch: &'a MeasurementBatch,
    anchors: &'a [Position],
    /// `sqrt(2) / sigma_i` with the floor applied.
    z_weight: Vec<f64>,
    /// `1 / gamma_i` with the floor applied.
    t_weight: Vec<f64>,
    c_mps: f64,
}

impl<'a> MleProblem<'a> {
    fn new(
        batch: &'a MeasurementBatch,
        anchors: &'a [Position],
        sigma_s: &[f64],
        gamma_s: &[f64],
        c_mps: f64,
        opts: &GnOptions,
    ) -> Self {
        let z_weight =
            sigma_s.iter().map(|s| std::f64::consts::SQRT_2 / s.max(opts.sigma_floor_s)).collect();
        let t_weight = gamma_s.iter().map(|g| 1.0 / g.max(opts.gamma_floor_s)).collect();
        MleProblem { batch, anchors, z_weight, t_weight, c_mps }
    }

    fn rounds(&self) -> usize {
        self.batch.z.nrows()
    }

    fn n_anchors(&self) -> usize {
        self.anchors.len()
    }
}

impl LmModel for MleProblem<'_> {
    fn param_len(&self) -> usize {
        3 + self.n_anchors()
    }

    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        let (k_rounds, n) = (self.rounds(), self.n_anchors());
        let pos = Position::new(p[0], p[1]);
        let w = p[2];
        let mut r = DVector::zeros(2 * k_rounds * n);
        for k in 0..k_rounds {
            for i in 0..n {
                let d = pos.distance_to(&self.anchors[i]);
                let t = p[3 + i];
                let m = k * n + i;
                r[m] = self.z_weight[i] * (self.batch.z[(k, i)] - w * (t / 2.0 + d / self.c_mps));
                r[k_rounds * n + m] = self.t_weight[i] * (self.batch.t_hat[(k, i)] - t);
            }
        }
        r
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let (k_rounds, n) = (self.rounds(), self.n_anchors());
        let pos = Position::new(p[0], p[1]);
        let w = p[2];
        let mut j = DMatrix::zeros(2 * k_rounds * n, 3 + n);
        for k in 0..k_rounds {
            for i in 0..n {
                let a = &self.anchors[i];
                let d = pos.distance_to(a).max(1e-12);
                let t = p[3 + i];
                let g = self.z_weight[i];
                let m = k * n + i;
                j[(m, 0)] = -g * w * (pos.x - a.x) / (self.c_mps * d);
                j[(m, 1)] = -g * w * (pos.y - a.y) / (self.c_mps * d);
                j[(m, 2)] = -g * (t / 2.0 + d / self.c_mps);
                j[(m, 3 + i)] = -g * w / 2.0;
                j[(k_rounds * n + m, 3 + i)] = -self.t_weight[i];
            }
        }
        j
    }

    fn project(&self, p: &mut DVector<f64>) {
        p[2] = p[2].max(1e-6);
        for i in 0..self.n_anchors() {
            p[3 + i] = p[3 + i].max(0.0);
        }
    }
}

// ---------- public api ----------

/// Negative log-likelihood (up to constants) at `state`, with default noise floors.
pub fn mle_objective(
    state: &MleState,
    batch: &MeasurementBatch,
    anchors: &[Position],
    sigma_s: &[f64],
    gamma_s: &[f64],
    c_mps: f64,
) -> f64 {
    let problem = MleProblem::new(batch, anchors, sigma_s, gamma_s, c_mps, &GnOptions::default());
    lm::objective_of(&problem, &state.to_vector())
}

/// Analytic gradient of [`mle_objective`], ordered `(x1, x2, w, T_1..T_N)`.
pub fn mle_gradient(
    state: &MleState,
    batch: &MeasurementBatch,
    anchors: &[Position],
    sigma_s: &[f64],
    gamma_s: &[f64],
    c_mps: f64,
) -> DVector<f64> {
    let problem = MleProblem::new(batch, anchors, sigma_s, gamma_s, c_mps, &GnOptions::default());
    let p = state.to_vector();
    let r = problem.residuals(&p);
    2.0 * problem.jacobian(&p).transpose() * r
}

/// Full maximum-likelihood fit with default options.
pub fn mle(
    batch: &MeasurementBatch,
    anchors: &[Position],
    sigma_s: &[f64],
    gamma_s: &[f64],
    c_mps: f64,
    init: &MleState,
) -> Result<EstimateReport, EstimatorError> {
    mle_with(batch, anchors, sigma_s, gamma_s, c_mps, init, &GnOptions::default())
        .map(|o| o.report)
}

/// Full maximum-likelihood fit with explicit options and diagnostics.
pub fn mle_with(
    batch: &MeasurementBatch,
    anchors: &[Position],
    sigma_s: &[f64],
    gamma_s: &[f64],
    c_mps: f64,
    init: &MleState,
    opts: &GnOptions,
) -> Result<MleOutcome, EstimatorError> {
    check_inputs(batch, anchors, sigma_s, gamma_s, c_mps)?;
    if init.turnaround_s.len() != anchors.len() {
        return Err(EstimatorError::Shape { what: "initial turn-arounds vs anchors" });
    }
    let p0 = init.to_vector();
    if p0.iter().any(|v| !v.is_finite()) {
        return Err(EstimatorError::NonFinite("initial state"));
    }

    let problem = MleProblem::new(batch, anchors, sigma_s, gamma_s, c_mps, opts);
    let (p, objective, grad_norm, iterations, converged) = if opts.use_simplex {
        let f = |q: &DVector<f64>| lm::objective_of(&problem, q);
        let project = |q: &mut DVector<f64>| problem.project(q);
        let mut scale = DVector::from_element(p0.len(), 1.0);
        scale[2] = 1e-4;
        for i in 3..p0.len() {
            scale[i] = 1e-8;
        }
        let out =
            simplex::nelder_mead(&f, &project, &p0, &scale, opts.max_iter, opts.grad_tol.max(1e-14));
        let r = problem.residuals(&out.p);
        let g = 2.0 * problem.jacobian(&out.p).transpose() * r;
        (out.p, out.objective, g.norm(), out.iterations, out.converged)
    } else {
        let out = lm::minimize(&problem, &p0, opts.max_iter, opts.grad_tol)?;
        (out.p, out.objective, out.grad_norm, out.iterations, out.converged)
    };

    let state = MleState::from_vector(&p);
    let status = if converged { SolverStatus::Converged } else { SolverStatus::MaxIter };
    let report = EstimateReport {
        position: state.position,
        skew: state.skew,
        turnaround_s: Some(state.turnaround_s.clone()),
        iterations,
        residual_l1_s: residual_l1(state.position, 1.0 / state.skew, batch, anchors, c_mps),
        solver_status: status,
    };
    Ok(MleOutcome { report, objective, grad_norm, state })
}

// ---------- tests ----------
