//! Robust l1 positioning by convex-concave majorization, one cone program
//! per outer iteration.
//!
//! The calibrated range residual `r_m(x, alpha) = zeta_m alpha - tau_m / 2 -
//! ||x - a_i||` (all in meters: `zeta = c z`, `tau = c t_hat`) is a
//! difference of convex functions, so `|r_m|` splits into a convex part and
//! a concave part. At the current iterate the concave part is replaced by
//! its tangent: with `H = (x^j - a_i) / ||x^j - a_i||`,
//!
//! ```text
//! ||x - a_i||  >=  H' (x - a_i)  =  H'x - H'x^j + d_i(x^j)
//! ```
//!
//! which turns the epigraph of `|r_m| <= t_m` into one linear inequality and
//! one second-order cone per measurement:
//!
//! ```text
//! zeta_m alpha - tau_m/2 - (H'x - H'x^j + d_i(x^j))  <=  t_m
//! ||x - a_i||  <=  zeta_m alpha - tau_m/2 + t_m
//! ```
//!
//! Minimizing `sum t_m` with the inverse skew boxed to `[0.5, 2]` and all
//! variables inside a large ball gives the next iterate. Each iteration's
//! feasible set contains the current iterate, so the true l1 residual never
//! increases.
//!
//! If an iterate lands on a reference node (distance below
//! `degeneracy_eps_m`) the unit vector is undefined; a fixed subgradient is
//! used, the outcome is marked [`SolverStatus::Degenerate`], and the
//! iteration continues.

use nalgebra::{DMatrix, DVector};

use super::EstimatorError;
use crate::model::{residual_l1, EstimateReport, MeasurementBatch, Position, SolverStatus};
use crate::socp::{solve_socp, SocpCone, SocpOptions, SocpProblem, SocpStatus};

// ---------- configuration ----------

/// Inverse-skew box enforced in every cone program.
const ALPHA_MIN: f64 = 0.5;
const ALPHA_MAX: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct CccpConfig {
    /// Initial position iterate.
    pub x0: Position,
    /// Initial inverse skew `alpha = 1/w`.
    pub alpha0: f64,
    /// Number of outer convex iterations.
    pub max_outer: usize,
    /// Distances below this (meters) trigger the fixed-subgradient fallback.
    pub degeneracy_eps_m: f64,
    /// Options forwarded to the inner cone solves.
    pub socp: SocpOptions,
}

impl CccpConfig {
    pub fn new(x0: Position) -> Self {
        CccpConfig {
            x0,
            alpha0: 1.0,
            max_outer: 3,
            degeneracy_eps_m: 1e-9,
            socp: SocpOptions::default(),
        }
    }

    fn validate(&self) -> Result<(), EstimatorError> {
        if !self.x0.is_finite() {
            return Err(EstimatorError::NonFinite("initial position"));
        }
        if !(self.alpha0.is_finite() && self.alpha0 > 0.0) {
            return Err(EstimatorError::BadConfig("initial inverse skew must be positive"));
        }
        if self.max_outer == 0 {
            return Err(EstimatorError::BadConfig("need at least one outer iteration"));
        }
        if !(self.degeneracy_eps_m.is_finite() && self.degeneracy_eps_m > 0.0) {
            return Err(EstimatorError::BadConfig("degeneracy distance must be positive"));
        }
        Ok(())
    }
}

/// Report plus the per-iteration l1 residual trace (seconds); entry 0 is the
/// residual at the initial point, entry `j` after outer iteration `j`.
#[derive(Debug, Clone)]
pub struct CccpOutcome {
    pub report: EstimateReport,
    pub residual_trace_s: Vec<f64>,
}

// ---------- one outer iteration ----------

/// The majorized cone program at iterate `(x, alpha)`. Variables are
/// `v = (x1, x2, alpha, t_1..t_KN)` in meters / dimensionless / meters.
/// Returns the problem and whether a degenerate distance was hit.
fn build_iteration_problem(
    batch: &MeasurementBatch,
    anchors: &[Position],
    c_mps: f64,
    x: Position,
    eps_m: f64,
    radius: f64,
) -> (SocpProblem, bool) {
    let (k_rounds, n_anchors) = (batch.rounds(), batch.n_anchors());
    let kn = k_rounds * n_anchors;
    let n_vars = 3 + kn;

    let mut cost = DVector::zeros(n_vars);
    for m in 0..kn {
        cost[3 + m] = 1.0;
    }
    let mut problem = SocpProblem::new(cost);

    let mut degenerate = false;
    for k in 0..k_rounds {
        for i in 0..n_anchors {
            let m = k * n_anchors + i;
            let a = anchors[i];
            let zeta = c_mps * batch.z[(k, i)];
            let tau = c_mps * batch.t_hat[(k, i)];

            let d = x.distance_to(&a);
            let h = if d < eps_m {
                degenerate = true;
                (1.0, 0.0)
            } else {
                ((x.x - a.x) / d, (x.y - a.y) / d)
            };
            // Tangent offset: the linearized distance is H'x + offset.
            let offset = -(h.0 * x.x + h.1 * x.y) + d;

            // t_m + H'x + offset - zeta alpha + tau/2 >= 0.
            let mut lin = DVector::zeros(n_vars);
            lin[0] = h.0;
            lin[1] = h.1;
            lin[2] = -zeta;
            lin[3 + m] = 1.0;
            problem = problem.with_cone(SocpCone::linear(lin, offset + tau / 2.0));

            // ||x - a_i|| <= zeta alpha + t_m - tau/2.
            let mut soc_a = DMatrix::zeros(2, n_vars);
            soc_a[(0, 0)] = 1.0;
            soc_a[(1, 1)] = 1.0;
            let soc_b = DVector::from_row_slice(&[-a.x, -a.y]);
            let mut soc_c = DVector::zeros(n_vars);
            soc_c[2] = zeta;
            soc_c[3 + m] = 1.0;
            problem = problem.with_cone(SocpCone::new(soc_a, soc_b, soc_c, -tau / 2.0));
        }
    }

    // Inverse-skew box.
    let mut lo = DVector::zeros(n_vars);
    lo[2] = 1.0;
    problem = problem.with_cone(SocpCone::linear(lo, -ALPHA_MIN));
    let mut hi = DVector::zeros(n_vars);
    hi[2] = -1.0;
    problem = problem.with_cone(SocpCone::linear(hi, ALPHA_MAX));

    (problem.with_bound(radius), degenerate)
}

/// Ball radius comfortably containing every plausible iterate: ten times the
/// diagonal of the reference bounding box (with a floor for tiny layouts).
fn trust_radius(anchors: &[Position]) -> f64 {
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for a in anchors {
        min_x = min_x.min(a.x);
        max_x = max_x.max(a.x);
        min_y = min_y.min(a.y);
        max_y = max_y.max(a.y);
    }
    let diag = (max_x - min_x).hypot(max_y - min_y);
    (10.0 * diag).max(100.0)
}

// ---------- public api ----------

/// Robust l1 fit; see [`cccp_socp_detailed`] for the residual trace.
pub fn cccp_socp(
    batch: &MeasurementBatch,
    anchors: &[Position],
    c_mps: f64,
    cfg: &CccpConfig,
) -> Result<EstimateReport, EstimatorError> {
    cccp_socp_detailed(batch, anchors, c_mps, cfg).map(|o| o.report)
}

/// Robust l1 fit with the per-iteration residual trace.
pub fn cccp_socp_detailed(
    batch: &MeasurementBatch,
    anchors: &[Position],
    c_mps: f64,
    cfg: &CccpConfig,
) -> Result<CccpOutcome, EstimatorError> {
    // The robust estimator needs no noise levels; reuse the shared check
    // with zero vectors.
    let zeros = vec![0.0; anchors.len()];
    super::check_inputs(batch, anchors, &zeros, &zeros, c_mps)?;
    cfg.validate()?;

    let radius = trust_radius(anchors);
    let mut x = cfg.x0;
    let mut alpha = cfg.alpha0.clamp(ALPHA_MIN, ALPHA_MAX);
    let mut trace = vec![residual_l1(x, alpha, batch, anchors, c_mps)];
    let mut degenerate = false;
    let mut all_optimal = true;
    let mut outer_done = 0;

    for _ in 0..cfg.max_outer {
        let (problem, hit_degenerate) =
            build_iteration_problem(batch, anchors, c_mps, x, cfg.degeneracy_eps_m, radius);
        degenerate |= hit_degenerate;

        let sol = solve_socp(&problem, &cfg.socp)?;
        match sol.status {
            SocpStatus::Optimal | SocpStatus::MaxIter => {
                if sol.status != SocpStatus::Optimal {
                    all_optimal = false;
                }
                x = Position::new(sol.x[0], sol.x[1]);
                alpha = sol.x[2].clamp(ALPHA_MIN, ALPHA_MAX);
                outer_done += 1;
                trace.push(residual_l1(x, alpha, batch, anchors, c_mps));
            }
            SocpStatus::Infeasible | SocpStatus::Unbounded => {
                // Cannot happen for a well-posed majorization (the current
                // iterate is feasible); treat as a solver failure and stop.
                all_optimal = false;
                break;
            }
        }
    }

    let status = if degenerate {
        SolverStatus::Degenerate
    } else if all_optimal {
        SolverStatus::Converged
    } else {
        SolverStatus::MaxIter
    };
    let report = EstimateReport {
        position: x,
        skew: 1.0 / alpha,
        turnaround_s: None,
        iterations: outer_done,
        residual_l1_s: *trace.last().expect("trace always has the initial entry"),
        solver_status: status,
    };
    Ok(CccpOutcome { report, residual_trace_s: trace })
}

// ---------- tests ----------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkScenario;
    use crate::sim::{simulate, SimConfig};

    fn anchors6() -> Vec<Position> {
        vec![
            Position::new(800.0, 800.0),
            Position::new(800.0, -800.0),
            Position::new(-800.0, 800.0),
            Position::new(-800.0, -800.0),
            Position::new(0.0, 800.0),
            Position::new(-800.0, 0.0),
        ]
    }

    fn scenario(c_sigma_m: f64, seed: u64) -> (NetworkScenario, MeasurementBatch) {
        let c = 3.0e8;
        let s = NetworkScenario::uniform(
            anchors6(),
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
    fn noiseless_residual_contracts_superlinearly() {
        let (s, batch) = scenario(0.0, 1);
        let cfg = CccpConfig::new(Position::new(0.0, 0.0));
        let out = cccp_socp_detailed(&batch, &s.anchors, s.c_mps, &cfg).unwrap();
        assert_eq!(out.report.solver_status, SolverStatus::Converged);
        assert_eq!(out.residual_trace_s.len(), 4);
        assert!(
            out.residual_trace_s[3] <= 1e-6 * out.residual_trace_s[0] + 1e-18,
            "trace {:?}",
            out.residual_trace_s
        );
        assert!(out.report.position.distance_to(&s.target) < 0.01);
    }

    #[test]
    fn residual_trace_never_increases() {
        let (s, batch) = scenario(10.0, 9);
        let mut cfg = CccpConfig::new(Position::new(-400.0, 350.0));
        cfg.max_outer = 6;
        let out = cccp_socp_detailed(&batch, &s.anchors, s.c_mps, &cfg).unwrap();
        for j in 1..out.residual_trace_s.len() {
            assert!(
                out.residual_trace_s[j] <= out.residual_trace_s[j - 1] + 1e-9,
                "trace increased at step {j}: {:?}",
                out.residual_trace_s
            );
        }
    }

    #[test]
    fn majorization_keeps_the_current_iterate_feasible() {
        // With t_m = |r_m(x)| the current iterate must satisfy every cone of
        // the problem built at that same iterate.
        let (s, batch) = scenario(10.0, 3);
        let x = Position::new(120.0, -80.0);
        let alpha = 1.0 / 1.0001;
        let (problem, degenerate) =
            build_iteration_problem(&batch, &s.anchors, s.c_mps, x, 1e-9, 1e9);
        assert!(!degenerate);

        let kn = batch.rounds() * batch.n_anchors();
        let mut v = DVector::zeros(3 + kn);
        v[0] = x.x;
        v[1] = x.y;
        v[2] = alpha;
        for k in 0..batch.rounds() {
            for i in 0..batch.n_anchors() {
                let m = k * batch.n_anchors() + i;
                let r_m = s.c_mps * batch.z[(k, i)] * alpha
                    - s.c_mps * batch.t_hat[(k, i)] / 2.0
                    - x.distance_to(&s.anchors[i]);
                v[3 + m] = r_m.abs();
            }
        }
        for cone in &problem.cones {
            let slack = cone.c.dot(&v) + cone.d;
            if cone.a.nrows() == 0 {
                assert!(slack >= -1e-9, "linear cone violated by {slack}");
            } else {
                let lhs = (&cone.a * &v + &cone.b).norm();
                assert!(lhs <= slack + 1e-9, "cone violated: {lhs} > {slack}");
            }
        }
    }

    #[test]
    fn starting_on_a_reference_node_is_flagged_degenerate() {
        let (s, batch) = scenario(1.0, 8);
        let cfg = CccpConfig::new(s.anchors[0]);
        let out = cccp_socp_detailed(&batch, &s.anchors, s.c_mps, &cfg).unwrap();
        assert_eq!(out.report.solver_status, SolverStatus::Degenerate);
        assert!(out.report.position.is_finite());
        // The fallback subgradient still allows progress toward the target.
        assert!(out.residual_trace_s.last().unwrap() < &out.residual_trace_s[0]);
    }

    #[test]
    fn zero_outer_iterations_is_rejected() {
        let (s, batch) = scenario(1.0, 8);
        let mut cfg = CccpConfig::new(Position::new(0.0, 0.0));
        cfg.max_outer = 0;
        let err = cccp_socp(&batch, &s.anchors, s.c_mps, &cfg).unwrap_err();
        assert!(matches!(err, EstimatorError::BadConfig(_)));
    }
}
