//! Approximate maximum-likelihood estimation of position and skew only.
//!
//! Substituting the reported turn-around `t_hat[k,i]` for the unknown true
//! wait in the round-trip model leaves the residual
//! `e = z - w (t_hat/2 + d/c)` with variance `s_i/2 = (sigma_i^2 + w^2
//! gamma_i^2)/2` — the report noise, scaled by the skew, folds into the
//! effective variance. Up to constants the negative log-likelihood is
//!
//! ```text
//! F(x, w) = sum over (k,i) of [ 2 e^2 / s_i + ln s_i ]
//! ```
//!
//! which this module minimizes over `(x1, x2, w)` by the same damped
//! Gauss-Newton engine as the full likelihood, with the log-variance term
//! carried exactly (value, gradient and curvature).

use nalgebra::{DMatrix, DVector};

use super::lm::{self, LmModel};
use super::simplex;
use super::{check_inputs, EstimatorError, GnOptions};
use crate::model::{residual_l1, EstimateReport, MeasurementBatch, Position, SolverStatus};

/// Report plus diagnostics for the approximate-likelihood fit.
#[derive(Debug, Clone)]
pub struct AmleOutcome {
    pub report: EstimateReport,
    /// Value of the approximate negative log-likelihood at the solution.
    pub objective: f64,
    /// Curvature-scaled gradient norm at exit.
    pub grad_norm: f64,
}

// ---------- model ----------

struct AmleProblem<'a> {
    batch: &'a MeasurementBatch,
    anchors: &'a [Position],
    sigma2: Vec<f64>,
    gamma2: Vec<f64>,
    c_mps: f64,
}

impl<'a> AmleProblem<'a> {
    fn new(
        batch: &'a MeasurementBatch,
        anchors: &'a [Position],
        sigma_s: &[f64],
        gamma_s: &[f64],
        c_mps: f64,
        opts: &GnOptions,
    ) -> Self {
        let sigma2 = sigma_s.iter().map(|s| s.max(opts.sigma_floor_s).powi(2)).collect();
        let gamma2 = gamma_s.iter().map(|g| g.max(opts.gamma_floor_s).powi(2)).collect();
        AmleProblem { batch, anchors, sigma2, gamma2, c_mps }
    }

    /// Effective variance scale `s_i = sigma_i^2 + w^2 gamma_i^2`.
    fn s_of(&self, i: usize, w: f64) -> f64 {
        self.sigma2[i] + w * w * self.gamma2[i]
    }
}

impl LmModel for AmleProblem<'_> {
    fn param_len(&self) -> usize {
        3
    }

    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        let (k_rounds, n) = (self.batch.rounds(), self.anchors.len());
        let pos = Position::new(p[0], p[1]);
        let w = p[2];
        let mut r = DVector::zeros(k_rounds * n);
        for k in 0..k_rounds {
            for i in 0..n {
                let d = pos.distance_to(&self.anchors[i]);
                let e = self.batch.z[(k, i)]
                    - w * (self.batch.t_hat[(k, i)] / 2.0 + d / self.c_mps);
                r[k * n + i] = (2.0 / self.s_of(i, w)).sqrt() * e;
            }
        }
        r
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let (k_rounds, n) = (self.batch.rounds(), self.anchors.len());
        let pos = Position::new(p[0], p[1]);
        let w = p[2];
        let mut j = DMatrix::zeros(k_rounds * n, 3);
        for k in 0..k_rounds {
            for i in 0..n {
                let a = &self.anchors[i];
                let d = pos.distance_to(a).max(1e-12);
                let s = self.s_of(i, w);
                let g = (2.0 / s).sqrt();
                let model_slope = self.batch.t_hat[(k, i)] / 2.0 + d / self.c_mps;
                let e = self.batch.z[(k, i)] - w * model_slope;
                let m = k * n + i;
                j[(m, 0)] = -g * w * (pos.x - a.x) / (self.c_mps * d);
                j[(m, 1)] = -g * w * (pos.y - a.y) / (self.c_mps * d);
                // Both the residual and its weight depend on the skew:
                // d/dw sqrt(2/s) = -sqrt(2/s) * w gamma^2 / s.
                j[(m, 2)] = g * (-model_slope - e * w * self.gamma2[i] / s);
            }
        }
        j
    }

    fn extra_value(&self, p: &DVector<f64>) -> f64 {
        let w = p[2];
        let k = self.batch.rounds() as f64;
        k * (0..self.anchors.len()).map(|i| self.s_of(i, w).ln()).sum::<f64>()
    }

    fn extra_gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        let w = p[2];
        let k = self.batch.rounds() as f64;
        let mut g = DVector::zeros(3);
        g[2] = k * (0..self.anchors.len())
            .map(|i| 2.0 * w * self.gamma2[i] / self.s_of(i, w))
            .sum::<f64>();
        g
    }

    fn extra_hessian_diag(&self, p: &DVector<f64>) -> DVector<f64> {
        let w = p[2];
        let k = self.batch.rounds() as f64;
        let mut h = DVector::zeros(3);
        h[2] = k * (0..self.anchors.len())
            .map(|i| {
                let s = self.s_of(i, w);
                let g2 = self.gamma2[i];
                2.0 * g2 / s - 4.0 * w * w * g2 * g2 / (s * s)
            })
            .sum::<f64>();
        h
    }

    fn project(&self, p: &mut DVector<f64>) {
        p[2] = p[2].max(1e-6);
    }
}

// ---------- public api ----------

/// Approximate negative log-likelihood (up to constants) at `(position, skew)`.
pub fn amle_objective(
    position: Position,
    skew: f64,
    batch: &MeasurementBatch,
    anchors: &[Position],
    sigma_s: &[f64],
    gamma_s: &[f64],
    c_mps: f64,
) -> f64 {
    let problem =
        AmleProblem::new(batch, anchors, sigma_s, gamma_s, c_mps, &GnOptions::default());
    lm::objective_of(&problem, &DVector::from_row_slice(&[position.x, position.y, skew]))
}

/// Analytic gradient of [`amle_objective`], ordered `(x1, x2, w)`.
pub fn amle_gradient(
    position: Position,
    skew: f64,
    batch: &MeasurementBatch,
    anchors: &[Position],
    sigma_s: &[f64],
    gamma_s: &[f64],
    c_mps: f64,
) -> DVector<f64> {
    let problem =
        AmleProblem::new(batch, anchors, sigma_s, gamma_s, c_mps, &GnOptions::default());
    let p = DVector::from_row_slice(&[position.x, position.y, skew]);
    let r = problem.residuals(&p);
    2.0 * problem.jacobian(&p).transpose() * r + problem.extra_gradient(&p)
}

/// Approximate maximum-likelihood fit with default options.
pub fn amle(
    batch: &MeasurementBatch,
    anchors: &[Position],
    sigma_s: &[f64],
    gamma_s: &[f64],
    c_mps: f64,
    init: (Position, f64),
) -> Result<EstimateReport, EstimatorError> {
    amle_with(batch, anchors, sigma_s, gamma_s, c_mps, init, &GnOptions::default())
        .map(|o| o.report)
}

/// Approximate maximum-likelihood fit with explicit options and diagnostics.
pub fn amle_with(
    batch: &MeasurementBatch,
    anchors: &[Position],
    sigma_s: &[f64],
    gamma_s: &[f64],
    c_mps: f64,
    init: (Position, f64),
    opts: &GnOptions,
) -> Result<AmleOutcome, EstimatorError> {
    check_inputs(batch, anchors, sigma_s, gamma_s, c_mps)?;
    let (x0, w0) = init;
    if !(x0.is_finite() && w0.is_finite()) {
        return Err(EstimatorError::NonFinite("initial state"));
    }

    let problem = AmleProblem::new(batch, anchors, sigma_s, gamma_s, c_mps, opts);
    let p0 = DVector::from_row_slice(&[x0.x, x0.y, w0]);
    let (p, objective, grad_norm, iterations, converged) = if opts.use_simplex {
        let f = |q: &DVector<f64>| lm::objective_of(&problem, q);
        let project = |q: &mut DVector<f64>| problem.project(q);
        let scale = DVector::from_row_slice(&[1.0, 1.0, 1e-4]);
        let out =
            simplex::nelder_mead(&f, &project, &p0, &scale, opts.max_iter, opts.grad_tol.max(1e-14));
        let r = problem.residuals(&out.p);
        let g = 2.0 * problem.jacobian(&out.p).transpose() * r + problem.extra_gradient(&out.p);
        (out.p, out.objective, g.norm(), out.iterations, out.converged)
    } else {
        let out = lm::minimize(&problem, &p0, opts.max_iter, opts.grad_tol)?;
        (out.p, out.objective, out.grad_norm, out.iterations, out.converged)
    };

    let position = Position::new(p[0], p[1]);
    let skew = p[2];
    let status = if converged { SolverStatus::Converged } else { SolverStatus::MaxIter };
    let report = EstimateReport {
        position,
        skew,
        turnaround_s: None,
        iterations,
        residual_l1_s: residual_l1(position, 1.0 / skew, batch, anchors, c_mps),
        solver_status: status,
    };
    Ok(AmleOutcome { report, objective, grad_norm })
}

// ---------- tests ----------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NetworkScenario, SolverStatus};
    use crate::sim::{simulate, SimConfig};

    fn scenario(c_sigma_m: f64, seed: u64) -> (NetworkScenario, MeasurementBatch) {
        let anchors = vec![
            Position::new(800.0, 800.0),
            Position::new(800.0, -800.0),
            Position::new(-800.0, 800.0),
            Position::new(-800.0, -800.0),
            Position::new(0.0, 800.0),
            Position::new(-800.0, 0.0),
        ];
        let c = 3.0e8;
        let s = NetworkScenario::uniform(
            anchors,
            Position::new(173.0, -241.0),
            1.0001,
            1.0e-6,
            c_sigma_m / c,
            c_sigma_m / c,
            c,
            2,
        )
        .unwrap();
        let batch = simulate(&s, &SimConfig::from_seed(seed)).unwrap();
        (s, batch)
    }

    #[test]
    fn noiseless_truth_is_recovered() {
        let (s, batch) = scenario(0.0, 1);
        let out = amle_with(
            &batch,
            &s.anchors,
            &s.sigma_s,
            &s.gamma_s,
            s.c_mps,
            (s.target, s.target_clock.skew),
            &GnOptions::default(),
        )
        .unwrap();
        assert_eq!(out.report.solver_status, SolverStatus::Converged);
        assert!(out.report.position.distance_to(&s.target) < 1e-8);
        assert!((out.report.skew - s.target_clock.skew).abs() < 1e-10);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (s, batch) = scenario(10.0, 11);
        let pos = Position::new(150.0, -200.0);
        let w = 1.0002;
        let g = amle_gradient(pos, w, &batch, &s.anchors, &s.sigma_s, &s.gamma_s, s.c_mps);

        let mut fd = DVector::zeros(3);
        let steps = [1e-3, 1e-3, 1e-8];
        for k in 0..3 {
            let probe = |delta: f64| {
                let mut q = [pos.x, pos.y, w];
                q[k] += delta;
                amle_objective(
                    Position::new(q[0], q[1]),
                    q[2],
                    &batch,
                    &s.anchors,
                    &s.sigma_s,
                    &s.gamma_s,
                    s.c_mps,
                )
            };
            fd[k] = (probe(steps[k]) - probe(-steps[k])) / (2.0 * steps[k]);
        }
        assert!(
            (&g - &fd).norm() <= 1e-5 * g.norm(),
            "gradient mismatch: {:.3e} vs allowed {:.3e}",
            (&g - &fd).norm(),
            1e-5 * g.norm()
        );
    }

    #[test]
    fn converges_from_a_cold_start() {
        let (s, batch) = scenario(5.0, 17);
        let report = amle(
            &batch,
            &s.anchors,
            &s.sigma_s,
            &s.gamma_s,
            s.c_mps,
            (Position::new(0.0, 0.0), 1.0),
        )
        .unwrap();
        assert_eq!(report.solver_status, SolverStatus::Converged);
        assert!(
            report.position.distance_to(&s.target) < 10.0,
            "position {} vs target {} (skew {})",
            report.position,
            s.target,
            report.skew
        );
        // Skew precision at this noise level is ~1e-3 (one standard
        // deviation); allow a few of those.
        assert!((report.skew - s.target_clock.skew).abs() < 5e-3, "skew {}", report.skew);
    }

    #[test]
    fn objective_penalizes_variance_through_the_log_term() {
        // With zero residuals the objective reduces to K * sum ln s_i, which
        // must grow with the skew through s_i = sigma^2 + w^2 gamma^2.
        let (s, batch) = scenario(0.0, 2);
        let f1 = amle_objective(
            s.target,
            s.target_clock.skew,
            &batch,
            &s.anchors,
            &s.sigma_s,
            &vec![1e-8; s.n_anchors()],
            s.c_mps,
        );
        let f2 = amle_objective(
            s.target,
            s.target_clock.skew,
            &batch,
            &s.anchors,
            &s.sigma_s,
            &vec![2e-8; s.n_anchors()],
            s.c_mps,
        );
        assert!(f2 > f1);
    }
}
