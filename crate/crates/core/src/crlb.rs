//! Fisher information and the position error lower bound.
//!
//! The joint parameter vector is `psi = (x1, x2, w, T_1..T_N)`: target
//! position, target clock skew, and the per-reference turn-around times. One
//! round of measurements has mean
//!
//! ```text
//! mu(psi) = [ w (d_1/c + T_1/2) .. w (d_N/c + T_N/2),  T_1 .. T_N ]
//! ```
//!
//! with independent Gaussian errors of variance `sigma_i^2 / 4` on the
//! round-trip observations and `gamma_i^2` on the reported turn-arounds.
//! With `K` independent rounds the information matrix is
//! `J = K * D' C^-1 D` where `D = d mu / d psi`. The Jacobian-based
//! computation is the authority; the closed-form per-entry expressions are
//! kept as cross-check fixtures (`closed_form`).
//!
//! The position bound is `[J^-1]_11 + [J^-1]_22` in squared meters. `J`
//! mixes units (meters, dimensionless skew, seconds), giving raw condition
//! numbers around 1e16, so the inversion symmetrically equilibrates `J` by
//! its diagonal first; the requested entries of the inverse are recovered
//! exactly from the scaled inverse.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::model::NetworkScenario;

// ---------- errors ----------

#[derive(Debug, Clone, PartialEq)]
pub enum CrlbError {
    /// The target coincides with an anchor; the range direction is undefined.
    TargetAtAnchor { anchor: usize },
    /// A noise scale is zero; the information matrix is not defined.
    ZeroNoise { anchor: usize },
    /// The information matrix could not be inverted.
    SingularFisher,
}

impl fmt::Display for CrlbError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CrlbError::TargetAtAnchor { anchor } => {
                write!(f, "target coincides with anchor {anchor}")
            }
            CrlbError::ZeroNoise { anchor } => {
                write!(f, "zero noise scale at anchor {anchor}: bound undefined")
            }
            CrlbError::SingularFisher => write!(f, "information matrix is singular"),
        }
    }
}

impl std::error::Error for CrlbError {}

// ---------- Fisher matrix ----------

/// Information matrix for `psi = (x1, x2, w, T_1..T_N)` along with the
/// per-round mean vector and (diagonal) covariance used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    /// (N+3) x (N+3) symmetric positive semidefinite matrix.
    pub j: DMatrix<f64>,
    /// Per-round stacked mean (length 2N) at the scenario's true parameters.
    pub mean: DVector<f64>,
    /// Diagonal of the per-round covariance (length 2N).
    pub cov_diag: DVector<f64>,
}

/// Closed-form entries of `J`, kept as an independent fixture for tests.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormFisher {
    pub j11: f64,
    pub j22: f64,
    pub j33: f64,
    pub j12: f64,
    pub j13: f64,
    pub j23: f64,
    /// Diagonal turn-around entries `J_{T_i T_i}`.
    pub j_tt: Vec<f64>,
    pub j_t_x1: Vec<f64>,
    pub j_t_x2: Vec<f64>,
    pub j_t_w: Vec<f64>,
}

/// The stacked per-round mean as a function of an arbitrary parameter
/// vector (layout `x1, x2, w, T_1..T_N`), using the scenario's anchors and
/// propagation speed. Exposed so tests can differentiate it numerically.
pub fn mean_vector(scenario: &NetworkScenario, params: &DVector<f64>) -> DVector<f64> {
    let n = scenario.n_anchors();
    assert_eq!(params.len(), n + 3, "parameter vector must be (x1, x2, w, T_1..T_N)");
    let (x1, x2, w) = (params[0], params[1], params[2]);
    let mut mu = DVector::zeros(2 * n);
    for i in 0..n {
        let a = scenario.anchors[i];
        let d = ((x1 - a.x) * (x1 - a.x) + (x2 - a.y) * (x2 - a.y)).sqrt();
        let t = params[3 + i];
        mu[i] = w * (d / scenario.c_mps + t / 2.0);
        mu[n + i] = t;
    }
    mu
}

fn true_params(scenario: &NetworkScenario) -> DVector<f64> {
    let n = scenario.n_anchors();
    let mut p = DVector::zeros(n + 3);
    p[0] = scenario.target.x;
    p[1] = scenario.target.y;
    p[2] = scenario.target_clock.skew;
    for i in 0..n {
        p[3 + i] = scenario.turnaround_s[i];
    }
    p
}

/// Analytic Jacobian `d mu / d psi` (2N x (N+3)) at the scenario's truth.
pub fn mean_jacobian(scenario: &NetworkScenario) -> Result<DMatrix<f64>, CrlbError> {
    let n = scenario.n_anchors();
    let w = scenario.target_clock.skew;
    let c = scenario.c_mps;
    let distances = scenario.distances_m();
    for (i, d) in distances.iter().enumerate() {
        if *d < 1e-9 {
            return Err(CrlbError::TargetAtAnchor { anchor: i });
        }
    }
    let mut jac = DMatrix::zeros(2 * n, n + 3);
    for i in 0..n {
        let a = scenario.anchors[i];
        let d = distances[i];
        jac[(i, 0)] = w * (scenario.target.x - a.x) / (c * d);
        jac[(i, 1)] = w * (scenario.target.y - a.y) / (c * d);
        jac[(i, 2)] = d / c + scenario.turnaround_s[i] / 2.0;
        jac[(i, 3 + i)] = w / 2.0;
        jac[(n + i, 3 + i)] = 1.0;
    }
    Ok(jac)
}

/// Information matrix `J = K D' C^-1 D` for the scenario.
pub fn fisher(scenario: &NetworkScenario) -> Result<FisherMatrix, CrlbError> {
    let n = scenario.n_anchors();
    for i in 0..n {
        if scenario.sigma_s[i] <= 0.0 || scenario.gamma_s[i] <= 0.0 {
            return Err(CrlbError::ZeroNoise { anchor: i });
        }
    }
    let jac = mean_jacobian(scenario)?;
    let mut cov_diag = DVector::zeros(2 * n);
    for i in 0..n {
        cov_diag[i] = scenario.sigma_s[i] * scenario.sigma_s[i] / 4.0;
        cov_diag[n + i] = scenario.gamma_s[i] * scenario.gamma_s[i];
    }
    let k = scenario.rounds as f64;
    let mut j = DMatrix::zeros(n + 3, n + 3);
    // J = K * sum over measurement rows of (row' row) / variance.
    for r in 0..2 * n {
        let inv_var = k / cov_diag[r];
        let row = jac.row(r);
        for p in 0..n + 3 {
            let rp = row[p];
            if rp == 0.0 {
                continue;
            }
            for q in 0..n + 3 {
                j[(p, q)] += inv_var * rp * row[q];
            }
        }
    }
    let mean = mean_vector(scenario, &true_params(scenario));
    Ok(FisherMatrix { j, mean, cov_diag })
}

/// Closed-form entries of `J` (independent of [`fisher`]'s generic loop).
pub fn closed_form(scenario: &NetworkScenario) -> Result<ClosedFormFisher, CrlbError> {
    let n = scenario.n_anchors();
    for i in 0..n {
        if scenario.sigma_s[i] <= 0.0 || scenario.gamma_s[i] <= 0.0 {
            return Err(CrlbError::ZeroNoise { anchor: i });
        }
    }
    let distances = scenario.distances_m();
    for (i, d) in distances.iter().enumerate() {
        if *d < 1e-9 {
            return Err(CrlbError::TargetAtAnchor { anchor: i });
        }
    }
    let w = scenario.target_clock.skew;
    let c = scenario.c_mps;
    let k = scenario.rounds as f64;

    let (mut j11, mut j22, mut j33, mut j12, mut j13, mut j23) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut j_tt = Vec::with_capacity(n);
    let mut j_t_x1 = Vec::with_capacity(n);
    let mut j_t_x2 = Vec::with_capacity(n);
    let mut j_t_w = Vec::with_capacity(n);
    for i in 0..n {
        let s2 = scenario.sigma_s[i] * scenario.sigma_s[i];
        let g2 = scenario.gamma_s[i] * scenario.gamma_s[i];
        let d = distances[i];
        let ex = (scenario.target.x - scenario.anchors[i].x) / (c * d);
        let ey = (scenario.target.y - scenario.anchors[i].y) / (c * d);
        let flight = d / c + scenario.turnaround_s[i] / 2.0;
        j11 += 4.0 * k * w * w * ex * ex / s2;
        j22 += 4.0 * k * w * w * ey * ey / s2;
        j12 += 4.0 * k * w * w * ex * ey / s2;
        j33 += 4.0 * k * flight * flight / s2;
        j13 += 4.0 * k * w * ex * flight / s2;
        j23 += 4.0 * k * w * ey * flight / s2;
        j_tt.push(k * (w * w / s2 + 1.0 / g2));
        j_t_x1.push(2.0 * k * w * w * ex / s2);
        j_t_x2.push(2.0 * k * w * w * ey / s2);
        j_t_w.push(2.0 * k * w * flight / s2);
    }
    Ok(ClosedFormFisher { j11, j22, j33, j12, j13, j23, j_tt, j_t_x1, j_t_x2, j_t_w })
}

/// Position error lower bound `[J^-1]_11 + [J^-1]_22` in squared meters.
pub fn crlb_position(scenario: &NetworkScenario) -> Result<f64, CrlbError> {
    let fm = fisher(scenario)?;
    let dim = fm.j.nrows();
    // Jacobi equilibration: J~ = S J S with S = diag(1/sqrt(J_ii)); then
    // [J^-1]_ii = S_ii^2 [J~^-1]_ii.
    let mut scale = DVector::zeros(dim);
    for i in 0..dim {
        let d = fm.j[(i, i)];
        if !(d.is_finite() && d > 0.0) {
            return Err(CrlbError::SingularFisher);
        }
        scale[i] = 1.0 / d.sqrt();
    }
    let mut scaled = fm.j.clone();
    for p in 0..dim {
        for q in 0..dim {
            scaled[(p, q)] *= scale[p] * scale[q];
        }
    }
    let chol = scaled.cholesky().ok_or(CrlbError::SingularFisher)?;
    let inv = chol.inverse();
    let var = inv[(0, 0)] * scale[0] * scale[0] + inv[(1, 1)] * scale[1] * scale[1];
    if !(var.is_finite() && var > 0.0) {
        return Err(CrlbError::SingularFisher);
    }
    Ok(var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NetworkScenario, Position};
    use approx::assert_relative_eq;

    const C: f64 = 3.0e8;

    fn ring_scenario(n: usize, sigma_m: f64) -> NetworkScenario {
        let anchors = (0..n)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Position::new(800.0 * th.cos(), 800.0 * th.sin())
            })
            .collect();
        NetworkScenario::uniform(
            anchors,
            Position::new(137.0, -263.0),
            1.0001,
            1.0e-6,
            sigma_m / C,
            sigma_m / C,
            C,
            2,
        )
        .unwrap()
    }

    #[test]
    fn generic_matrix_matches_closed_forms() {
        let s = ring_scenario(6, 10.0);
        let fm = fisher(&s).unwrap();
        let cf = closed_form(&s).unwrap();
        assert_relative_eq!(fm.j[(0, 0)], cf.j11, max_relative = 1e-10);
        assert_relative_eq!(fm.j[(1, 1)], cf.j22, max_relative = 1e-10);
        assert_relative_eq!(fm.j[(2, 2)], cf.j33, max_relative = 1e-10);
        assert_relative_eq!(fm.j[(0, 1)], cf.j12, max_relative = 1e-10);
        assert_relative_eq!(fm.j[(0, 2)], cf.j13, max_relative = 1e-10);
        assert_relative_eq!(fm.j[(1, 2)], cf.j23, max_relative = 1e-10);
        for i in 0..6 {
            assert_relative_eq!(fm.j[(3 + i, 3 + i)], cf.j_tt[i], max_relative = 1e-10);
            assert_relative_eq!(fm.j[(3 + i, 0)], cf.j_t_x1[i], max_relative = 1e-10);
            assert_relative_eq!(fm.j[(3 + i, 1)], cf.j_t_x2[i], max_relative = 1e-10);
            assert_relative_eq!(fm.j[(3 + i, 2)], cf.j_t_w[i], max_relative = 1e-10);
            for j in 0..6 {
                if i != j {
                    assert_eq!(fm.j[(3 + i, 3 + j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let s = ring_scenario(5, 10.0);
        let jac = mean_jacobian(&s).unwrap();
        let p0 = super::true_params(&s);
        let n = s.n_anchors();
        // Per-parameter steps on each parameter's own scale: position in
        // meters, skew near one, turn-arounds in microseconds.
        let mut worst: f64 = 0.0;
        for col in 0..n + 3 {
            let h = match col {
                0 | 1 => 1e-3,
                2 => 1e-7,
                _ => 1e-9,
            };
            let mut plus = p0.clone();
            let mut minus = p0.clone();
            plus[col] += h;
            minus[col] -= h;
            let fd = (mean_vector(&s, &plus) - mean_vector(&s, &minus)) / (2.0 * h);
            for row in 0..2 * n {
                let exact = jac[(row, col)];
                let scale = exact.abs().max(1e-12);
                worst = worst.max((fd[row] - exact).abs() / scale);
            }
        }
        assert!(worst <= 1e-6, "worst relative Jacobian error {worst:.3e}");
    }

    #[test]
    fn axis_aligned_anchor_has_no_cross_partial() {
        // Anchor 0 due east of the target: the first round-trip mean cannot
        // change with x2 at first order.
        let s = NetworkScenario::uniform(
            vec![
                Position::new(500.0, 0.0),
                Position::new(0.0, 700.0),
                Position::new(-300.0, -400.0),
            ],
            Position::new(0.0, 0.0),
            1.0,
            1.0e-6,
            10.0 / C,
            10.0 / C,
            C,
            1,
        )
        .unwrap();
        let jac = mean_jacobian(&s).unwrap();
        assert_eq!(jac[(0, 1)], 0.0);
    }

    #[test]
    fn doubling_rounds_doubles_information() {
        let s1 = ring_scenario(5, 10.0);
        let mut s2 = s1.clone();
        s2.rounds = 4;
        let j1 = fisher(&s1).unwrap().j;
        let j2 = fisher(&s2).unwrap().j;
        for p in 0..8 {
            for q in 0..8 {
                assert_eq!(j2[(p, q)], 2.0 * j1[(p, q)]);
            }
        }
    }

    #[test]
    fn matrix_is_symmetric_positive_semidefinite() {
        let s = ring_scenario(7, 5.0);
        let fm = fisher(&s).unwrap();
        let sym_err = (&fm.j - fm.j.transpose()).norm();
        assert!(sym_err <= 1e-12 * fm.j.norm());
        let eig = nalgebra::SymmetricEigen::new(fm.j.clone());
        let norm = eig.eigenvalues.abs().max();
        assert!(eig.eigenvalues.min() >= -1e-10 * norm);
        assert!(fm.cov_diag.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn bound_scales_quadratically_with_noise() {
        let lo = crlb_position(&ring_scenario(6, 10.0)).unwrap();
        let hi = crlb_position(&ring_scenario(6, 20.0)).unwrap();
        assert_relative_eq!(hi / lo, 4.0, max_relative = 1e-6);
    }

    #[test]
    fn bound_shrinks_with_each_added_anchor() {
        let mut last = f64::INFINITY;
        for n in 4..=8 {
            let b = crlb_position(&ring_scenario(n, 10.0)).unwrap();
            assert!(b < last, "bound did not shrink at n={n}: {b} !< {last}");
            assert!(b > 0.0);
            last = b;
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let mut at_anchor = ring_scenario(5, 10.0);
        at_anchor.target = at_anchor.anchors[2];
        assert!(matches!(fisher(&at_anchor), Err(CrlbError::TargetAtAnchor { anchor: 2 })));

        let mut no_noise = ring_scenario(5, 10.0);
        no_noise.gamma_s[3] = 0.0;
        assert!(matches!(fisher(&no_noise), Err(CrlbError::ZeroNoise { anchor: 3 })));
        assert!(matches!(closed_form(&no_noise), Err(CrlbError::ZeroNoise { anchor: 3 })));
    }

    #[test]
    fn mean_vector_matches_forward_model_at_truth() {
        let s = ring_scenario(5, 10.0);
        let mu = mean_vector(&s, &super::true_params(&s));
        for i in 0..5 {
            assert_relative_eq!(
                mu[i],
                crate::model::predict_twtoa(&s, i),
                max_relative = 1e-15
            );
            assert_eq!(mu[5 + i], s.turnaround_s[i]);
        }
    }
}
