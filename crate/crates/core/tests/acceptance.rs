//! Acceptance suite: the end-to-end guarantees this crate ships with.
//!
//! One test per guarantee. Each prints a single `PASS` or `FAIL` line with
//! its headline numbers (visible with `--nocapture`); the panic message on
//! failure carries the same detail. Tests serialize on a process-wide lock
//! so the stated wall-clock budgets and the relative-timing check are
//! measured on an otherwise idle process; the Monte Carlo drivers inside
//! still fan out over the worker pool.

use std::sync::Mutex;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use twtoa_core::bench::{
    bench_anchors, detail_to_csv, run_experiment, run_experiment_detailed, timing_report,
    ExperimentSpec, Method,
};
use twtoa_core::crlb::{fisher, mean_vector};
use twtoa_core::estimators::{
    amle, cccp_socp, cccp_socp_detailed, lls, mle, sqls, CccpConfig, MleState,
};
use twtoa_core::gtrs::{build_gtrs, gtrs_phi, multiplier_interval_start, solve_gtrs, GtrsProblem};
use twtoa_core::model::{NetworkScenario, Position};
use twtoa_core::sim::{simulate, NlosConfig, SimConfig};
use twtoa_core::socp::{solve_socp, SocpCone, SocpOptions, SocpProblem, SocpStatus};

// ---------- shared plumbing ----------

const C_MPS: f64 = 3.0e8;

static GATE: Mutex<()> = Mutex::new(());

/// Run acceptance tests one at a time (a poisoned lock from an earlier
/// failure must not block the rest of the suite).
fn serialize() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

/// Print the one-line verdict and panic when anything failed.
fn verdict(name: &str, failures: &[String], detail: &str) {
    if failures.is_empty() {
        println!("[{name}] PASS {detail}");
    } else {
        println!("[{name}] FAIL ({} checks) {}", failures.len(), failures.join(" | "));
        panic!("{name}: {} check(s) failed: {}", failures.len(), failures.join(" | "));
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Reference nodes drawn uniformly in the deployment square, kept at least
/// 80 m apart so the lifted linear model is generically well conditioned.
fn random_anchors(rng: &mut ChaCha8Rng, n: usize) -> Vec<Position> {
    let mut out: Vec<Position> = Vec::with_capacity(n);
    while out.len() < n {
        let cand =
            Position::new(rng.random_range(-800.0..800.0), rng.random_range(-800.0..800.0));
        if out.iter().all(|a| a.distance_to(&cand) >= 80.0) {
            out.push(cand);
        }
    }
    out
}

/// Target (or start point) uniform in the square, at least 10 m from every
/// reference node.
fn random_target(rng: &mut ChaCha8Rng, anchors: &[Position]) -> Position {
    loop {
        let cand =
            Position::new(rng.random_range(-800.0..800.0), rng.random_range(-800.0..800.0));
        if anchors.iter().all(|a| a.distance_to(&cand) >= 10.0) {
            return cand;
        }
    }
}

// ---------- 1: noiseless round trip ----------

#[test]
fn a01_noiseless_round_trip() {
    let _g = serialize();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA001);
    let mut failures = Vec::new();
    let (mut worst_x, mut worst_w) = (0.0f64, 0.0f64);

    for case in 0..100usize {
        let n = 5 + case % 4;
        let k = 1 + case % 3;
        let anchors = random_anchors(&mut rng, n);
        let target = random_target(&mut rng, &anchors);
        let skew = rng.random_range(0.99..1.01);
        let scenario = NetworkScenario::uniform(
            anchors.clone(),
            target,
            skew,
            1.0e-6,
            0.0,
            0.0,
            C_MPS,
            k,
        )
        .expect("valid scenario");
        let batch = simulate(&scenario, &SimConfig::from_seed(rng.next_u64())).expect("simulate");

        // The three local iterative methods start from the truth: on exact
        // measurements the truth must be a fixed point they do not drift
        // from, which any sign, unit or weighting defect would break. The
        // closed-form methods take no start.
        let init = MleState::new(target, skew, scenario.turnaround_s.clone());
        let mut cccp_cfg = CccpConfig::new(target);
        cccp_cfg.alpha0 = 1.0 / skew;
        cccp_cfg.max_outer = 10;
        let sigma = &scenario.sigma_s;
        let gamma = &scenario.gamma_s;
        let outcomes = [
            ("mle", mle(&batch, &anchors, sigma, gamma, C_MPS, &init)),
            ("amle", amle(&batch, &anchors, sigma, gamma, C_MPS, (target, skew))),
            ("lls", lls(&batch, &anchors, C_MPS, sigma, gamma)),
            ("sqls", sqls(&batch, &anchors, C_MPS, sigma, gamma)),
            ("cccp", cccp_socp(&batch, &anchors, C_MPS, &cccp_cfg)),
        ];
        for (tag, outcome) in outcomes {
            match outcome {
                Ok(r) => {
                    let ex = r.position.distance_to(&target);
                    let ew = (r.skew - skew).abs();
                    worst_x = worst_x.max(ex);
                    worst_w = worst_w.max(ew);
                    if !(ex <= 1e-5 && ew <= 1e-8) {
                        failures
                            .push(format!("case {case} {tag}: x err {ex:.2e} m, w err {ew:.2e}"));
                    }
                }
                Err(e) => failures.push(format!("case {case} {tag}: {e}")),
            }
        }
    }

    let secs = start.elapsed().as_secs_f64();
    if secs > 60.0 {
        failures.push(format!("runtime {secs:.1} s > 60 s"));
    }
    verdict(
        "a01 noiseless-round-trip",
        &failures,
        &format!("worst x err {worst_x:.2e} m, worst w err {worst_w:.2e}, {secs:.1} s"),
    );
}

// ---------- 2 & 3: constrained linear solver vs a dense oracle ----------

/// A realistic lifted least-squares instance: random geometry, moderate
/// noise, half the cases with non-identity row weights.
fn random_lifted_case(rng: &mut ChaCha8Rng, case: usize) -> GtrsProblem {
    let n = 5 + case % 4;
    let k = 1 + case % 2;
    let anchors = random_anchors(rng, n);
    let target = random_target(rng, &anchors);
    let skew = rng.random_range(0.99..1.01);
    let noise = rng.random_range(1.0..10.0) / C_MPS;
    let scenario =
        NetworkScenario::uniform(anchors.clone(), target, skew, 1.0e-6, noise, noise, C_MPS, k)
            .expect("valid scenario");
    let batch = simulate(&scenario, &SimConfig::from_seed(rng.next_u64())).expect("simulate");
    let weights = (case % 2 == 1)
        .then(|| DVector::from_fn(k * n, |_, _| rng.random_range(0.5..2.0)));
    build_gtrs(&batch, &anchors, C_MPS, weights.as_ref()).expect("well-posed instance")
}

/// Weighted objective at an arbitrary 5-vector.
fn lifted_objective(p: &GtrsProblem, y: &[f64; 5]) -> f64 {
    let mut total = 0.0;
    for r in 0..p.a.nrows() {
        let mut resid = -p.b[r];
        for (j, yj) in y.iter().enumerate() {
            resid += p.a[(r, j)] * yj;
        }
        total += p.w[r] * resid * resid;
    }
    total
}

/// Feasible-set residual `y'Dy + 2f'y` of the single quadratic constraint.
fn lifting_residual(y: &DVector<f64>) -> f64 {
    y[1] * y[1] + y[2] * y[2] + y[4] * y[4] - y[0] - y[3]
}

/// Best objective over the feasible manifold found by a dense scan over
/// (x1, x2, alpha) followed by a shrinking local grid search. Every probe
/// point is lifted exactly, so it satisfies the constraint by construction.
fn grid_oracle_best(p: &GtrsProblem) -> f64 {
    let eval = |x1: f64, x2: f64, alpha: f64| {
        lifted_objective(p, &[x1 * x1 + x2 * x2, x1, x2, alpha * alpha, alpha])
    };

    let mut best = (f64::INFINITY, 0.0, 0.0, 1.0);
    let steps = 40;
    for ix in 0..=steps {
        let x1 = -1000.0 + 2000.0 * ix as f64 / steps as f64;
        for iy in 0..=steps {
            let x2 = -1000.0 + 2000.0 * iy as f64 / steps as f64;
            for ia in 0..=20 {
                let alpha = 0.90 + 0.20 * ia as f64 / 20.0;
                let obj = eval(x1, x2, alpha);
                if obj < best.0 {
                    best = (obj, x1, x2, alpha);
                }
            }
        }
    }

    let (mut span_x, mut span_a) = (50.0, 0.01);
    for _ in 0..60 {
        let (_, cx1, cx2, ca) = best;
        for dx in -2i32..=2 {
            for dy in -2i32..=2 {
                for da in -2i32..=2 {
                    let x1 = cx1 + span_x * dx as f64 / 2.0;
                    let x2 = cx2 + span_x * dy as f64 / 2.0;
                    let alpha = ca + span_a * da as f64 / 2.0;
                    let obj = eval(x1, x2, alpha);
                    if obj < best.0 {
                        best = (obj, x1, x2, alpha);
                    }
                }
            }
        }
        span_x *= 0.55;
        span_a *= 0.55;
    }
    best.0
}

#[test]
fn a02_constrained_solver_matches_grid_oracle() {
    let _g = serialize();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA002);
    let mut failures = Vec::new();
    let (mut worst_excess, mut worst_resid) = (f64::NEG_INFINITY, 0.0f64);

    for case in 0..200usize {
        let p = random_lifted_case(&mut rng, case);
        match solve_gtrs(&p, None) {
            Ok(sol) => {
                let y = [sol.y[0], sol.y[1], sol.y[2], sol.y[3], sol.y[4]];
                let obj = lifted_objective(&p, &y);
                let oracle = grid_oracle_best(&p);
                let excess = obj - oracle;
                worst_excess = worst_excess.max(excess);
                if excess > 1e-6 {
                    failures.push(format!(
                        "case {case}: objective {obj:.6e} above oracle {oracle:.6e} by {excess:.2e}"
                    ));
                }
                let resid = lifting_residual(&sol.y).abs();
                worst_resid = worst_resid.max(resid);
                if resid > 1e-8 {
                    failures.push(format!("case {case}: constraint residual {resid:.2e}"));
                }
            }
            Err(e) => failures.push(format!("case {case}: solver error: {e}")),
        }
    }

    let secs = start.elapsed().as_secs_f64();
    if secs > 120.0 {
        failures.push(format!("runtime {secs:.1} s > 120 s"));
    }
    verdict(
        "a02 constrained-solver-vs-grid-oracle",
        &failures,
        &format!(
            "worst objective excess {worst_excess:.2e}, worst constraint residual {worst_resid:.2e}, {secs:.1} s"
        ),
    );
}

#[test]
fn a03_multiplier_function_strictly_decreasing() {
    let _g = serialize();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA003);
    let mut failures = Vec::new();
    let mut min_drop = f64::INFINITY;

    for case in 0..100usize {
        let p = random_lifted_case(&mut rng, case);
        let left = multiplier_interval_start(&p).expect("interval start");
        let span = -left;
        assert!(span > 0.0, "interval start must be negative");
        let mus: Vec<f64> = (0..20)
            .map(|j| left + span * 10f64.powf(-4.0 + 7.0 * j as f64 / 19.0))
            .collect();
        let mut phis = Vec::with_capacity(20);
        for mu in &mus {
            match gtrs_phi(&p, *mu) {
                Ok(v) => phis.push(v),
                Err(e) => {
                    failures.push(format!("case {case}: phi({mu:.3e}) failed: {e}"));
                    phis.push(f64::NAN);
                }
            }
        }
        for j in 0..19 {
            let drop = phis[j] - phis[j + 1];
            min_drop = min_drop.min(drop);
            if !(drop > 0.0) {
                failures.push(format!(
                    "case {case}: phi({:.6e}) = {:.6e} !> phi({:.6e}) = {:.6e}",
                    mus[j],
                    phis[j],
                    mus[j + 1],
                    phis[j + 1]
                ));
            }
        }
    }

    verdict(
        "a03 multiplier-function-monotonicity",
        &failures,
        &format!("2000 ordered evaluations, smallest successive drop {min_drop:.2e}"),
    );
}

// ---------- 4: majorization descent and speed ----------

#[test]
fn a04_majorization_descent_and_speed() {
    let _g = serialize();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA004);
    let mut failures = Vec::new();
    let mut worst_ratio = 0.0f64;

    for &n in &[6usize, 8] {
        let anchors = bench_anchors(n, false);
        let target = random_target(&mut rng, &anchors);
        let noise = 10.0 / C_MPS;
        let scenario = NetworkScenario::uniform(
            anchors.clone(),
            target,
            1.0001,
            1.0e-6,
            noise,
            noise,
            C_MPS,
            2,
        )
        .expect("valid scenario");
        let batch = simulate(&scenario, &SimConfig::from_seed(rng.next_u64())).expect("simulate");

        for init in 0..25usize {
            let mut cfg = CccpConfig::new(random_target(&mut rng, &anchors));
            cfg.max_outer = 10;
            let out = cccp_socp_detailed(&batch, &anchors, C_MPS, &cfg).expect("robust fit");
            let tr = &out.residual_trace_s;
            if tr.len() != 11 {
                failures.push(format!("N={n} init {init}: trace length {}", tr.len()));
                continue;
            }
            for j in 0..tr.len() - 1 {
                if tr[j + 1] > tr[j] + 1e-9 {
                    failures.push(format!(
                        "N={n} init {init}: residual rose {:.6e} -> {:.6e} at step {j}",
                        tr[j],
                        tr[j + 1]
                    ));
                }
            }
            let ratio = (tr[3] - tr[10]).abs() / tr[10];
            worst_ratio = worst_ratio.max(ratio);
            if ratio > 0.05 {
                failures.push(format!(
                    "N={n} init {init}: step-3 residual {:.3e} is {:.1}% off the step-10 value {:.3e}",
                    tr[3],
                    100.0 * ratio,
                    tr[10]
                ));
            }
        }
    }

    verdict(
        "a04 majorization-descent-and-speed",
        &failures,
        &format!("50 traces non-increasing; worst step-3 vs step-10 deviation {:.2}%", 100.0 * worst_ratio),
    );
}

// ---------- 5: error bound consistency ----------

#[test]
fn a05_error_bound_consistency() {
    let _g = serialize();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA005);
    let mut failures = Vec::new();

    // Analytic information matrix vs central finite differences of the
    // per-round mean, on scenarios with per-node noise and waits.
    let mut worst_rel = 0.0f64;
    for case in 0..20usize {
        let n = 5 + case % 4;
        let k = 1 + case % 3;
        let anchors = random_anchors(&mut rng, n);
        let target = random_target(&mut rng, &anchors);
        let scenario = NetworkScenario::new(
            anchors.clone(),
            target,
            twtoa_core::model::ClockModel::with_skew(rng.random_range(0.99..1.01)),
            (0..n).map(|_| rng.random_range(0.5e-6..2.0e-6)).collect(),
            (0..n).map(|_| rng.random_range(1.0..20.0) / C_MPS).collect(),
            (0..n).map(|_| rng.random_range(1.0..20.0) / C_MPS).collect(),
            C_MPS,
            k,
        )
        .expect("valid scenario");

        let fm = fisher(&scenario).expect("information matrix");
        let dim = n + 3;
        let mut p0 = DVector::zeros(dim);
        p0[0] = target.x;
        p0[1] = target.y;
        p0[2] = scenario.target_clock.skew;
        for i in 0..n {
            p0[3 + i] = scenario.turnaround_s[i];
        }

        let mut jac_fd = DMatrix::zeros(2 * n, dim);
        for j in 0..dim {
            let h = 1e-6 * (p0[j].abs() + 1e-3);
            let mut plus = p0.clone();
            plus[j] += h;
            let mut minus = p0.clone();
            minus[j] -= h;
            let df = (mean_vector(&scenario, &plus) - mean_vector(&scenario, &minus)) / (2.0 * h);
            jac_fd.set_column(j, &df);
        }
        let kf = scenario.rounds as f64;
        let mut f_fd = DMatrix::zeros(dim, dim);
        for r in 0..2 * n {
            let inv_var = kf / fm.cov_diag[r];
            let row = jac_fd.row(r);
            f_fd += inv_var * row.transpose() * row;
        }
        let rel = (&fm.j - &f_fd).norm() / fm.j.norm();
        worst_rel = worst_rel.max(rel);
        if rel > 1e-6 {
            failures.push(format!("case {case}: information matrix FD mismatch {rel:.2e}"));
        }
    }

    // Likelihood fit started at the truth tracks the bound.
    let spec = ExperimentSpec::new(6, vec![10.0], 500, vec![Method::Mle], 0xA055);
    let table = run_experiment(&spec).expect("experiment");
    let row = &table.rows[0];
    let ratio = row.rmse_m / row.crlb_m;
    if !(0.85..=1.3).contains(&ratio) {
        failures.push(format!(
            "RMSE {:.3} m vs bound {:.3} m: ratio {ratio:.3} outside [0.85, 1.3]",
            row.rmse_m, row.crlb_m
        ));
    }

    let secs = start.elapsed().as_secs_f64();
    if secs > 300.0 {
        failures.push(format!("runtime {secs:.1} s > 300 s"));
    }
    verdict(
        "a05 error-bound-consistency",
        &failures,
        &format!(
            "worst FD mismatch {worst_rel:.2e}; RMSE/bound ratio {ratio:.3} over {} fits ({} failures), {secs:.1} s",
            row.trials, row.failures
        ),
    );
}

// ---------- 6: method ordering at few reference nodes ----------

#[test]
fn a06_method_ordering_small_network() {
    let _g = serialize();
    let methods = vec![Method::Lls, Method::Sqls, Method::Cccp];
    let spec = ExperimentSpec::new(5, vec![5.0, 10.0], 500, methods, 77);
    let table = run_experiment(&spec).expect("experiment");
    let mut failures = Vec::new();
    let mut notes = Vec::new();

    for &sigma in &[5.0, 10.0] {
        let rmse = |m: Method| {
            table
                .rows
                .iter()
                .find(|r| r.method == m && r.c_sigma_m == sigma)
                .map(|r| (r.rmse_m, r.failures))
                .expect("row present")
        };
        let (r_lls, f_lls) = rmse(Method::Lls);
        let (r_sqls, f_sqls) = rmse(Method::Sqls);
        let (r_cccp, f_cccp) = rmse(Method::Cccp);

        for (a, b, pair) in [
            (r_cccp, r_sqls, "robust vs constrained"),
            (r_sqls, r_lls, "constrained vs linear"),
        ] {
            if a > b {
                failures.push(format!(
                    "sigma {sigma}: {pair} ordering violated ({a:.2} m > {b:.2} m)"
                ));
            } else if a > 0.95 * b {
                notes.push(format!("sigma {sigma}: {pair} within 5% — statistical tie"));
            }
        }
        notes.push(format!(
            "sigma {sigma}: {r_cccp:.2} <= {r_sqls:.2} <= {r_lls:.2} m (failures {f_cccp}/{f_sqls}/{f_lls})"
        ));
    }

    verdict("a06 method-ordering-small-network", &failures, &notes.join("; "));
}

// ---------- 7: robustness under biased outliers ----------

#[test]
fn a07_outlier_robustness() {
    let _g = serialize();
    let mut spec = ExperimentSpec::new(5, vec![1.0, 5.0], 500, vec![Method::Mle, Method::Cccp], 707);
    spec.nlos = Some(NlosConfig::new(0.2, 5.0 / C_MPS).expect("bias config"));
    let table = run_experiment(&spec).expect("experiment");
    let mut failures = Vec::new();
    let mut notes = Vec::new();

    for &sigma in &[1.0, 5.0] {
        let rmse = |m: Method| {
            table
                .rows
                .iter()
                .find(|r| r.method == m && r.c_sigma_m == sigma)
                .map(|r| (r.rmse_m, r.failures))
                .expect("row present")
        };
        let (r_mle, f_mle) = rmse(Method::Mle);
        let (r_cccp, f_cccp) = rmse(Method::Cccp);
        if !(r_cccp < r_mle) {
            failures.push(format!(
                "sigma {sigma}: robust fit {r_cccp:.3} m not below likelihood fit {r_mle:.3} m"
            ));
        }
        notes.push(format!(
            "sigma {sigma}: robust {r_cccp:.2} m < likelihood {r_mle:.2} m (failures {f_cccp}/{f_mle})"
        ));
    }

    verdict("a07 outlier-robustness", &failures, &notes.join("; "));
}

// ---------- 8: cone solver vs an independent slow oracle ----------

/// Random strictly feasible, bounded cone instance: every cone holds with a
/// positive margin at a known interior point, and a ball keeps the problem
/// compact.
fn random_cone_instance(rng: &mut ChaCha8Rng, n: usize) -> SocpProblem {
    let x0 = DVector::from_fn(n, |_, _| 2.0 * gauss(rng));
    let cost = DVector::from_fn(n, |_, _| gauss(rng));
    let mut problem = SocpProblem::new(cost);
    for _ in 0..rng.random_range(1..=4usize) {
        let rows = rng.random_range(0..=3usize);
        let a = DMatrix::from_fn(rows, n, |_, _| gauss(rng));
        let b = DVector::from_fn(rows, |_, _| gauss(rng));
        let c = DVector::from_fn(n, |_, _| gauss(rng));
        let margin = rng.random_range(0.1..2.0);
        let d = (&a * &x0 + &b).norm() + margin - c.dot(&x0);
        problem = problem.with_cone(SocpCone::new(a, b, c, d));
    }
    let radius = x0.norm() + rng.random_range(1.0..10.0);
    problem.with_bound(radius)
}

/// Ellipsoid-method minimizer: start from a ball containing the feasible
/// set, cut on the most violated constraint (or on the objective when
/// feasible), and keep the best feasible value. Slow but independent of the
/// interior-point machinery.
fn ellipsoid_min(p: &SocpProblem) -> f64 {
    let n = p.n;
    assert!(n >= 2, "oracle update needs n >= 2");
    let radius = p.bound.expect("instances are generated with a ball bound");
    let r0 = radius + 1.0;
    let nf = n as f64;

    let mut x = DVector::zeros(n);
    let mut shape = DMatrix::identity(n, n) * (r0 * r0);
    let mut best = f64::INFINITY;
    let iters = (2.0 * nf * (nf + 1.0) * 30.0).ceil() as usize;

    for _ in 0..iters {
        let mut worst_v = 0.0f64;
        let mut cut: Option<DVector<f64>> = None;
        for cone in &p.cones {
            let au = &cone.a * &x + &cone.b;
            let resid = au.norm();
            let v = resid - cone.c.dot(&x) - cone.d;
            if v > worst_v {
                worst_v = v;
                cut = Some(if cone.a.nrows() > 0 && resid > 1e-12 {
                    cone.a.transpose() * au / resid - &cone.c
                } else {
                    -cone.c.clone()
                });
            }
        }
        let xnorm = x.norm();
        if xnorm - radius > worst_v {
            worst_v = xnorm - radius;
            cut = Some(if xnorm > 1e-12 {
                &x / xnorm
            } else {
                DVector::from_fn(n, |j, _| if j == 0 { 1.0 } else { 0.0 })
            });
        }

        let g = match cut {
            Some(g) if worst_v > 0.0 => g,
            _ => {
                best = best.min(p.cost.dot(&x));
                p.cost.clone()
            }
        };

        let pg = &shape * &g;
        let gpg = g.dot(&pg);
        if !(gpg.is_finite() && gpg > 1e-300) {
            break;
        }
        x -= &pg / ((nf + 1.0) * gpg.sqrt());
        shape = (nf * nf / (nf * nf - 1.0))
            * (shape - (2.0 / (nf + 1.0)) * (&pg * pg.transpose()) / gpg);
        shape = (shape.clone() + shape.transpose()) * 0.5;
    }
    best
}

#[test]
fn a08_cone_solver_matches_slow_oracle() {
    let _g = serialize();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA008);
    let mut failures = Vec::new();
    let (mut worst_rel, mut worst_gap) = (0.0f64, 0.0f64);

    for case in 0..200usize {
        let n = if case % 10 == 9 {
            rng.random_range(9..=20usize)
        } else {
            rng.random_range(2..=8usize)
        };
        let p = random_cone_instance(&mut rng, n);
        let sol = solve_socp(&p, &SocpOptions::default()).expect("well-formed instance");
        if sol.status != SocpStatus::Optimal {
            failures.push(format!("case {case} (n={n}): status {}", sol.status));
            continue;
        }
        worst_gap = worst_gap.max(sol.gap);
        if sol.gap > 1e-8 {
            failures.push(format!("case {case} (n={n}): gap {:.2e}", sol.gap));
        }
        let oracle = ellipsoid_min(&p);
        let rel = (sol.objective - oracle).abs() / oracle.abs().max(1.0);
        worst_rel = worst_rel.max(rel);
        if rel > 1e-5 {
            failures.push(format!(
                "case {case} (n={n}): objective {:.8e} vs oracle {:.8e} (rel {rel:.2e})",
                sol.objective, oracle
            ));
        }
    }

    verdict(
        "a08 cone-solver-vs-slow-oracle",
        &failures,
        &format!("worst relative objective error {worst_rel:.2e}, worst gap {worst_gap:.2e}"),
    );
}

// ---------- 9: relative timing ----------

#[test]
fn a09_relative_timing() {
    let _g = serialize();
    let methods = vec![Method::Lls, Method::Sqls, Method::Cccp];
    let spec = ExperimentSpec::new(6, vec![10.0], 60, methods, 909);
    let rows = timing_report(&spec).expect("timing report");
    let ms = |m: Method| {
        rows.iter().find(|r| r.method == m).map(|r| r.mean_ms).expect("row present")
    };
    let (t_lls, t_sqls, t_cccp) = (ms(Method::Lls), ms(Method::Sqls), ms(Method::Cccp));

    let mut failures = Vec::new();
    if !(t_lls < t_sqls) {
        failures.push(format!("linear {t_lls:.4} ms not below constrained {t_sqls:.4} ms"));
    }
    if !(t_sqls < t_cccp) {
        failures.push(format!("constrained {t_sqls:.4} ms not below robust {t_cccp:.4} ms"));
    }
    verdict(
        "a09 relative-timing",
        &failures,
        &format!("mean wall-clock {t_lls:.4} < {t_sqls:.4} < {t_cccp:.4} ms"),
    );
}

// ---------- 10: benchmark determinism ----------

#[test]
fn a10_benchmark_rerun_is_byte_identical() {
    let _g = serialize();
    let spec = ExperimentSpec::new(5, vec![5.0, 10.0], 40, Method::ALL.to_vec(), 42);
    let (t1, d1) = run_experiment_detailed(&spec).expect("first run");
    let (t2, d2) = run_experiment_detailed(&spec).expect("second run");
    let (csv1, csv2) = (t1.to_csv(), t2.to_csv());
    let (det1, det2) = (detail_to_csv(&d1), detail_to_csv(&d2));

    let mut failures = Vec::new();
    if csv1 != csv2 {
        failures.push("summary tables differ between reruns".to_string());
    }
    if det1 != det2 {
        failures.push("detail tables differ between reruns".to_string());
    }
    verdict(
        "a10 benchmark-rerun-determinism",
        &failures,
        &format!("{} summary bytes and {} detail bytes reproduced exactly", csv1.len(), det1.len()),
    );
}
