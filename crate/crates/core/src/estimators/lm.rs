//! Shared Levenberg-Marquardt engine for the likelihood-based estimators.
//!
//! Minimizes `F(p) = ||r(p)||^2 + extra(p)` where `r` is a residual vector
//! with analytic Jacobian and `extra` is an optional smooth term supplying
//! its own gradient and (diagonal) curvature — used for the log-variance
//! term of the approximate likelihood. The Gauss-Newton model is
//! `H = 2 J'J + diag(extra)`, damped the Marquardt way (`lambda * diag(H)`),
//! which is solved in Jacobi-scaled coordinates: the parameters mix meters,
//! a dimensionless skew and seconds, so the raw normal matrix has condition
//! numbers near 1e16 while the scaled one is benign. Scaling also gives the
//! stopping rule a meaningful metric: convergence is declared on the
//! curvature-scaled gradient norm `|| g / sqrt(diag H) || <= tol (1 + |F|)`
//! (or on a vanishing accepted step).

use nalgebra::{DMatrix, DVector};

use super::EstimatorError;

pub(crate) trait LmModel {
    fn param_len(&self) -> usize;
    fn residuals(&self, p: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64>;
    fn extra_value(&self, _p: &DVector<f64>) -> f64 {
        0.0
    }
    fn extra_gradient(&self, _p: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.param_len())
    }
    fn extra_hessian_diag(&self, _p: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.param_len())
    }
    /// Clamp parameters back into their feasible region.
    fn project(&self, p: &mut DVector<f64>);
}

pub(crate) struct LmOutcome {
    pub p: DVector<f64>,
    pub objective: f64,
    /// Curvature-scaled gradient norm at exit.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn objective_of(model: &impl LmModel, p: &DVector<f64>) -> f64 {
    let r = model.residuals(p);
    r.norm_squared() + model.extra_value(p)
}

pub(crate) fn minimize(
    model: &impl LmModel,
    p0: &DVector<f64>,
    max_iter: usize,
    grad_tol: f64,
) -> Result<LmOutcome, EstimatorError> {
    let n = model.param_len();
    let mut p = p0.clone();
    model.project(&mut p);

    let mut f = objective_of(model, &p);
    if !f.is_finite() {
        return Err(EstimatorError::NonFinite("objective at the initial point"));
    }

    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        let r = model.residuals(&p);
        let j = model.jacobian(&p);
        let g = 2.0 * j.transpose() * &r + model.extra_gradient(&p);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFinite("gradient"));
        }
        let mut h = 2.0 * j.transpose() * &j;
        let extra_h = model.extra_hessian_diag(&p);
        for k in 0..n {
            h[(k, k)] += extra_h[k];
        }

        // Jacobi scale from the curvature diagonal; a flat direction gets a
        // unit scale so damping still acts on it.
        let h_floor = 1e-30 * (h.trace().abs() / n as f64 + 1.0);
        let scale = DVector::from_fn(n, |k, _| {
            let d = h[(k, k)];
            if d > h_floor {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        });
        let g_scaled = DVector::from_fn(n, |k, _| g[k] * scale[k]);
        if g_scaled.norm() <= grad_tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }

        let mut h_scaled = h.clone();
        for a in 0..n {
            for b in 0..n {
                h_scaled[(a, b)] *= scale[a] * scale[b];
            }
        }

        // Try increasingly damped steps until one descends.
        let mut accepted = false;
        while iterations < max_iter {
            iterations += 1;
            let mut damped = h_scaled.clone();
            for k in 0..n {
                damped[(k, k)] += lambda * h_scaled[(k, k)].max(1e-12);
            }
            let step = match damped.cholesky() {
                Some(chol) => {
                    let mut d = chol.solve(&(-&g_scaled));
                    for k in 0..n {
                        d[k] *= scale[k];
                    }
                    Some(d)
                }
                None => None,
            };
            if let Some(step) = step {
                let mut trial = &p + &step;
                model.project(&mut trial);
                let f_trial = objective_of(model, &trial);
                if f_trial.is_finite() && f_trial < f {
                    let rel_step = step.norm() / (1.0 + p.norm());
                    p = trial;
                    f = f_trial;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if rel_step <= 1e-14 {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                // No descent left at the resolution of the model: stationary
                // for all practical purposes.
                converged = true;
                break;
            }
        }
        if converged || !accepted {
            break;
        }
    }

    // Refresh the scaled gradient norm at the final point.
    let r = model.residuals(&p);
    let j = model.jacobian(&p);
    let g = 2.0 * j.transpose() * &r + model.extra_gradient(&p);
    let mut h_diag = DVector::zeros(n);
    let jtj_diag = |k: usize| -> f64 { 2.0 * j.column(k).norm_squared() };
    let extra_h = model.extra_hessian_diag(&p);
    for k in 0..n {
        h_diag[k] = jtj_diag(k) + extra_h[k];
    }
    let mut gn = 0.0;
    for k in 0..n {
        let s = if h_diag[k] > 0.0 { 1.0 / h_diag[k].sqrt() } else { 1.0 };
        gn += (g[k] * s) * (g[k] * s);
    }
    let grad_norm = gn.sqrt();
    if grad_norm <= grad_tol * (1.0 + f.abs()) {
        converged = true;
    }

    Ok(LmOutcome { p, objective: f, grad_norm, iterations, converged })
}
