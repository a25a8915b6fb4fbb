//! Minimal Nelder-Mead simplex search, used as a derivative-free fallback
//! for the likelihood objectives when requested via `GnOptions::use_simplex`.

use nalgebra::DVector;

pub(crate) struct SimplexOutcome {
    pub p: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Standard Nelder-Mead with reflection 1, expansion 2, contraction 0.5 and
/// shrink 0.5. `scale` sets the initial simplex edge along each coordinate.
/// Every candidate is projected back into the feasible region before it is
/// evaluated. Stops when the value spread across the simplex falls below
/// `tol * (1 + |best|)`.
pub(crate) fn nelder_mead(
    f: &dyn Fn(&DVector<f64>) -> f64,
    project: &dyn Fn(&mut DVector<f64>),
    p0: &DVector<f64>,
    scale: &DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> SimplexOutcome {
    let n = p0.len();
    let eval = |mut p: DVector<f64>| -> (DVector<f64>, f64) {
        project(&mut p);
        let v = f(&p);
        (p, if v.is_finite() { v } else { f64::INFINITY })
    };

    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push(eval(p0.clone()));
    for k in 0..n {
        let mut p = p0.clone();
        let step = if scale[k] != 0.0 { scale[k] } else { 1e-3 };
        p[k] += step;
        simplex.push(eval(p));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= tol * (1.0 + best.abs()) {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = DVector::zeros(n);
        for v in simplex.iter().take(n) {
            centroid += &v.0;
        }
        centroid /= n as f64;

        let reflected = eval(&centroid * 2.0 - &simplex[n].0);
        if reflected.1 < simplex[0].1 {
            let expanded = eval(&centroid * 3.0 - &simplex[n].0 * 2.0);
            simplex[n] = if expanded.1 < reflected.1 { expanded } else { reflected };
        } else if reflected.1 < simplex[n - 1].1 {
            simplex[n] = reflected;
        } else {
            let toward = if reflected.1 < simplex[n].1 { &reflected.0 } else { &simplex[n].0 };
            let contracted = eval(&centroid * 0.5 + toward * 0.5);
            let limit = simplex[n].1.min(reflected.1);
            if contracted.1 < limit {
                simplex[n] = contracted;
            } else {
                // Shrink everything toward the best vertex.
                let anchor = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let moved = (&v.0 + &anchor) * 0.5;
                    *v = eval(moved);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (p, objective) = simplex.swap_remove(0);
    SimplexOutcome { p, objective, iterations, converged }
}
